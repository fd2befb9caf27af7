"""Constraint blocks of the input-oriented VRS envelopment LP and their row uncertainty.

For an object ``t`` in a category with n members the decision vector is
``eta = (lambda_1..lambda_n, phi, theta)``. The LP reads

    min theta  s.t.  A eta <= 0,  B eta = (1, 1),  eta >= 0

where output rows of ``A`` are ``[-Y | y_t | 0]`` and input rows are
``[X | 0 | -x_t]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from equiclass.errors import ObjectNotInCategory
from equiclass.model import CharacteristicTable, UncertaintySpec


@dataclass(frozen=True, eq=False)
class DeaBlocks:
    A: np.ndarray
    B: np.ndarray
    c: np.ndarray
    target_column: int
    outputs: int

    @property
    def size(self) -> int:
        return self.A.shape[1] - 2


@dataclass(frozen=True, eq=False)
class RowUncertainty:
    R_prime: np.ndarray
    R_double_prime: np.ndarray
    row_index: int

    @property
    def R(self) -> np.ndarray:
        return np.hstack([self.R_prime, self.R_double_prime])


def _target_column(category: Sequence[int], t: int) -> int:
    cat = sorted(category)
    try:
        return cat.index(t)
    except ValueError:
        raise ObjectNotInCategory(f"object {t} is not in category {cat}") from None


def build_blocks(table: CharacteristicTable, category: Sequence[int], t: int) -> DeaBlocks:
    j = _target_column(category, t)
    cat = sorted(category)
    n, M, N = len(cat), table.M, table.N
    X = table.inputs[:, cat]
    Y = table.outputs[:, cat]

    A = np.zeros((M + N, n + 2))
    A[:M, :n] = -Y
    A[:M, n] = Y[:, j]
    A[M:, :n] = X
    A[M:, n + 1] = -X[:, j]

    B = np.zeros((2, n + 2))
    B[0, :n] = 1.0
    B[1, n] = 1.0
    c = np.zeros(n + 2)
    c[-1] = 1.0
    return DeaBlocks(A, B, c, j, M)


def eta_hat(blocks: DeaBlocks) -> np.ndarray:
    """The always-feasible point: the object alone, phi = 1, theta = 1."""
    eta = np.zeros(blocks.size + 2)
    eta[blocks.target_column] = 1.0
    eta[-2:] = 1.0
    return eta


def build_row_uncertainty(
    spec: UncertaintySpec,
    category: Sequence[int],
    t: int,
    i: int,
    outputs: int,
) -> RowUncertainty:
    """R_i = [R'_i | R''_i] for constraint row ``i`` (0-based, outputs first).

    The column of R''_i that shadows object ``t`` (the phi column for an
    output row, the theta column for an input row) is the negated ``t``-th
    column of R'_i, so a perturbation moves both copies of t's value together.
    """
    j = _target_column(category, t)
    R_prime = spec.prime(category, i)
    R_dd = np.zeros((R_prime.shape[0], 2))
    slot = 0 if i < outputs else 1
    R_dd[:, slot] = -R_prime[:, j]
    return RowUncertainty(R_prime, R_dd, i)


def row_uncertainties(
    spec: UncertaintySpec, category: Sequence[int], t: int, outputs: int, rows: int
) -> list[RowUncertainty]:
    return [build_row_uncertainty(spec, category, t, i, outputs) for i in range(rows)]
