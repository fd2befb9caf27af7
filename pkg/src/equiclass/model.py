"""Domain types shared across the package.

Objects are identified by their column index in the characteristic table;
labels are only used for display. Every constraint-row vector (including the
uncertainty scales) lists the M output rows first and the N input rows after.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from equiclass.errors import (
    BadExplicitShape,
    DimensionMismatch,
    NonFiniteEntry,
    NonPositiveInput,
)


def _frozen_array(values, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim == 1 and ndim == 2:
        arr = arr.reshape(1, -1)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CharacteristicTable:
    """Inputs (N x T, smaller is better) and outputs (M x T, larger is better)."""

    object_ids: tuple
    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "object_ids", tuple(self.object_ids))
        object.__setattr__(self, "inputs", _frozen_array(self.inputs, 2))
        object.__setattr__(self, "outputs", _frozen_array(self.outputs, 2))

    @classmethod
    def from_arrays(cls, inputs, outputs, object_ids=None) -> "CharacteristicTable":
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        if object_ids is None:
            object_ids = [str(k) for k in range(inputs.shape[1])]
        return validate_table(cls(object_ids, inputs, outputs))

    @property
    def N(self) -> int:
        return self.inputs.shape[0]

    @property
    def M(self) -> int:
        return self.outputs.shape[0]

    @property
    def T(self) -> int:
        return self.inputs.shape[1]

    @property
    def rows(self) -> int:
        """Number of DEA constraint rows, M + N."""
        return self.M + self.N

    def columns(self, category: Sequence[int]) -> "CharacteristicTable":
        """Sub-table restricted to ``category`` (ascending object order)."""
        idx = sorted(category)
        return CharacteristicTable(
            [self.object_ids[k] for k in idx], self.inputs[:, idx], self.outputs[:, idx]
        )


def validate_table(table: CharacteristicTable) -> CharacteristicTable:
    """Return ``table`` unchanged if its shape and value invariants hold."""
    T = len(table.object_ids)
    if T < 1 or table.N < 1 or table.M < 1:
        raise DimensionMismatch("need at least one object, one input and one output")
    if table.inputs.shape[1] != T or table.outputs.shape[1] != T:
        raise DimensionMismatch(
            f"column counts differ: ids={T}, inputs={table.inputs.shape[1]}, "
            f"outputs={table.outputs.shape[1]}"
        )
    if not (np.all(np.isfinite(table.inputs)) and np.all(np.isfinite(table.outputs))):
        raise NonFiniteEntry("characteristic values must be finite")
    if np.any(table.inputs <= 0):
        i, t = np.argwhere(table.inputs <= 0)[0]
        raise NonPositiveInput(f"input {i} of object {table.object_ids[t]!r} is not positive")
    return table


@dataclass(frozen=True)
class Classification:
    categories: tuple
    proximity: tuple | None = None
    total: float | None = None

    def __post_init__(self):
        cats = tuple(tuple(sorted(int(k) for k in c)) for c in self.categories)
        object.__setattr__(self, "categories", cats)
        if self.proximity is not None:
            prox = tuple(float(p) for p in self.proximity)
            object.__setattr__(self, "proximity", prox)
            if self.total is None:
                object.__setattr__(self, "total", float(sum(prox)))

    @property
    def S(self) -> int:
        return len(self.categories)

    def with_proximity(self, values: Sequence[float]) -> "Classification":
        return Classification(self.categories, tuple(values), float(sum(values)))

    def category_of(self, t: int) -> int:
        for s, cat in enumerate(self.categories):
            if t in cat:
                return s
        raise KeyError(t)

    def labels(self, T: int) -> list[int]:
        """Category index of every object."""
        out = [-1] * T
        for s, cat in enumerate(self.categories):
            for t in cat:
                out[t] = s
        return out

    def moved(self, t: int, source: int, dest: int) -> "Classification":
        """Copy with object ``t`` moved from category ``source`` to ``dest``; caches dropped."""
        cats = [list(c) for c in self.categories]
        cats[source].remove(t)
        cats[dest].append(t)
        return Classification(tuple(cats))


def partition_is_valid(classification: Classification, T: int, S: int) -> bool:
    cats = classification.categories
    if len(cats) != S or any(len(c) == 0 for c in cats):
        return False
    seen = [k for c in cats for k in c]
    return len(seen) == len(set(seen)) == T and set(seen) == set(range(T))


@dataclass(frozen=True)
class UncertaintySpec:
    """Structure of the row uncertainty matrices.

    ``identity`` uses R'_i = I for every row. ``diagonal`` uses
    R'_i = diag(weights[category]) with one strictly positive weight per
    object. ``explicit`` supplies R'_i per constraint row for one fixed
    category and cannot be used while categories change.
    """

    kind: str = "identity"
    weights: tuple | None = None
    matrices: Mapping[int, np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("identity", "diagonal", "explicit"):
            raise ValueError(f"unknown uncertainty kind {self.kind!r}")
        if self.kind == "diagonal":
            if self.weights is None:
                raise ValueError("diagonal uncertainty needs weights")
            w = tuple(float(v) for v in self.weights)
            if any(not np.isfinite(v) or v <= 0 for v in w):
                raise ValueError("diagonal weights must be finite and strictly positive")
            object.__setattr__(self, "weights", w)
        if self.kind == "explicit" and not self.matrices:
            raise ValueError("explicit uncertainty needs one matrix per row")

    @classmethod
    def identity(cls) -> "UncertaintySpec":
        return cls("identity")

    @classmethod
    def diagonal(cls, weights) -> "UncertaintySpec":
        return cls("diagonal", tuple(weights))

    @classmethod
    def explicit(cls, matrices: Mapping[int, np.ndarray]) -> "UncertaintySpec":
        return cls("explicit", matrices={int(i): np.atleast_2d(np.asarray(m, float))
                                         for i, m in matrices.items()})

    @property
    def searchable(self) -> bool:
        """Whether the spec stays meaningful when categories are rebuilt."""
        return self.kind != "explicit"

    def prime(self, category: Sequence[int], i: int) -> np.ndarray:
        """R'_i for constraint row ``i`` (0-based) of ``category``."""
        n = len(category)
        if self.kind == "identity":
            return np.eye(n)
        if self.kind == "diagonal":
            return np.diag([self.weights[k] for k in sorted(category)])
        try:
            mat = self.matrices[i]
        except KeyError:
            raise BadExplicitShape(f"no explicit uncertainty matrix for row {i}") from None
        if mat.shape[1] != n:
            raise BadExplicitShape(
                f"row {i}: explicit matrix has {mat.shape[1]} columns, category has {n}"
            )
        return mat

    def describe(self) -> str:
        if self.kind == "diagonal":
            return "diagonal:" + ",".join(repr(w) for w in self.weights)
        return self.kind


def sigma_vector(values, size: int | None = None) -> np.ndarray:
    """Validated uncertainty-scale vector (outputs first, then inputs)."""
    sigma = np.array(values, dtype=float).reshape(-1)
    if size is not None and sigma.size != size:
        raise DimensionMismatch(f"sigma has length {sigma.size}, expected {size}")
    if not np.all(np.isfinite(sigma)):
        raise NonFiniteEntry("sigma must be finite")
    if np.any(sigma < 0):
        raise ValueError("sigma must be componentwise nonnegative")
    return sigma


@dataclass(frozen=True, eq=False)
class ProximityResult:
    category: tuple
    sigma_hat: np.ndarray
    lower_bound: float
    upper_bound: float
    estimate: float
    sigma: np.ndarray
    decided_by_single_object: bool = False
    trace: tuple = ()
    exit_reason: str = "trivial"
    final_direction_value: float | None = None
    flags: tuple = ()

    def as_dict(self) -> dict:
        return {
            "category": list(self.category),
            "estimate": self.estimate,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "sigma_hat": self.sigma_hat.tolist(),
            "sigma": self.sigma.tolist(),
            "decided_by_single_object": self.decided_by_single_object,
            "exit_reason": self.exit_reason,
            "final_direction_value": self.final_direction_value,
            "trace": [list(p) for p in self.trace],
            "flags": list(self.flags),
        }
