"""Classification of objects with uncertain characteristics by proximity to equitable efficiency."""

from equiclass.model import (
    CharacteristicTable,
    Classification,
    ProximityResult,
    UncertaintySpec,
    partition_is_valid,
    validate_table,
)
from equiclass.errors import EquiclassError

__all__ = [
    "CharacteristicTable",
    "Classification",
    "EquiclassError",
    "ProximityResult",
    "UncertaintySpec",
    "partition_is_valid",
    "validate_table",
]

__version__ = "0.1.0"
