"""Nominal and robust (ellipsoidal) VRS efficiency of one object within one category."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from equiclass.assembly import build_blocks, row_uncertainties
from equiclass.descent import BOUNDARY_MARGIN, descend
from equiclass.errors import CapabilityNotReached, SolverFailure
from equiclass.model import CharacteristicTable, UncertaintySpec, sigma_vector
from equiclass.solver import (
    INFEASIBLE,
    OPTIMAL,
    STATS,
    ConicProgram,
    SocConstraint,
    solve_with_escalation,
)

EPS_EFF = 1e-6
# Scores above one by more than this are treated as a broken solve.
SCORE_SLACK = 1e-6
# Relative upward nudges tried when a solve sits on a score jump.
NUDGES = (1e-7, 1e-6, 1e-5)
# Slack (relative to the data scale) above which the score is certainly one.
VIOLATION_TOL = 1e-9


def envelopment_program(
    table: CharacteristicTable,
    category: Sequence[int],
    t: int,
    sigma,
    spec: UncertaintySpec | None = None,
) -> ConicProgram:
    """Cone form over eta: A_i eta + sigma_i ||R_i eta|| <= 0, B eta = e, eta >= 0."""
    blocks = build_blocks(table, category, t)
    sigma = sigma_vector(sigma, table.rows)
    lin = [i for i in range(table.rows) if sigma[i] == 0.0]
    cones = []
    if len(lin) < table.rows:
        rus = row_uncertainties(spec or UncertaintySpec.identity(), category, t, table.M, table.rows)
        for i in range(table.rows):
            if sigma[i] > 0.0:
                F = sigma[i] * rus[i].R
                cones.append(SocConstraint(F, np.zeros(F.shape[0]), -blocks.A[i], 0.0))
    A_ub = blocks.A[lin] if lin else None
    b_ub = np.zeros(len(lin)) if lin else None
    return ConicProgram(blocks.c, blocks.B, np.ones(2), A_ub, b_ub, cones)


def reduction_map(n: int, j: int) -> np.ndarray:
    """Linear map P with eta = eta_hat + P z for z = (weights of the other members, tau).

    It eliminates the target's own weight through the convexity row and
    writes theta = 1 - tau.
    """
    P = np.zeros((n + 2, n))
    others = [k for k in range(n) if k != j]
    for col, k in enumerate(others):
        P[k, col] = 1.0
        P[j, col] = -1.0
    P[n + 1, n - 1] = -1.0
    return P


def robust_program(
    table: CharacteristicTable,
    category: Sequence[int],
    t: int,
    sigma,
    spec: UncertaintySpec | None = None,
) -> ConicProgram:
    """Equivalent homogeneous form of the robust efficiency program.

    Because A eta_hat = 0 and R_i eta_hat = 0, substituting
    eta = eta_hat + P z leaves every row homogeneous in z. A feasible point
    with tau > 0 can therefore be rescaled onto the slice where the other
    members' weights sum to one, so

        E^t(sigma) = 1 - max(0, max{tau : sum(w) = 1, w >= 0, rows hold}),

    and an infeasible slice means E^t(sigma) = 1. Unlike the envelopment
    form, the slice keeps an interior whenever the score is below one, which
    interior-point solvers need near the threshold where the score jumps.
    """
    blocks = build_blocks(table, category, t)
    sigma = sigma_vector(sigma, table.rows)
    n = blocks.size
    P = reduction_map(n, blocks.target_column)
    AP = blocks.A @ P
    lin = [i for i in range(table.rows) if sigma[i] == 0.0]
    cones = []
    if len(lin) < table.rows:
        rus = row_uncertainties(spec or UncertaintySpec.identity(), category, t, table.M, table.rows)
        for i in range(table.rows):
            if sigma[i] > 0.0:
                F = sigma[i] * (rus[i].R @ P)
                cones.append(SocConstraint(F, np.zeros(F.shape[0]), -AP[i], 0.0))
    c = np.zeros(n)
    c[-1] = -1.0
    A_eq = np.ones((1, n))
    A_eq[0, -1] = 0.0
    lb = np.zeros(n)
    lb[-1] = -np.inf
    ub = np.full(n, np.inf)
    ub[-1] = 1.0
    return ConicProgram(
        c, A_eq, np.ones(1), AP[lin] if lin else None, np.zeros(len(lin)) if lin else None,
        cones, lb, ub,
    )


def _score(prog: ConicProgram) -> float:
    out = solve_with_escalation(prog)
    if out.status == INFEASIBLE:
        return 1.0
    if out.status != OPTIMAL:
        raise SolverFailure(f"efficiency program reported {out.status}", out.status)
    return 1.0 - max(0.0, min(-out.value, 1.0))


def _score_envelopment(prog: ConicProgram) -> float:
    out = solve_with_escalation(prog)
    if out.status != OPTIMAL:
        # eta-hat is always feasible and the objective is bounded below by 0
        raise SolverFailure(f"efficiency program reported {out.status}", out.status)
    if out.value > 1.0 + SCORE_SLACK:
        raise SolverFailure(f"efficiency score {out.value} exceeds one")
    return min(out.value, 1.0)


def violation_program(prog: ConicProgram) -> ConicProgram:
    """Smallest common slack s >= 0 letting every row of ``prog`` hold with tau >= 0.

    The program always has an interior, so it solves cleanly even where the
    efficiency program itself is degenerate. Its optimum is zero while the
    score is below one and grows linearly with the distance past the jump.
    """
    n = prog.n
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_eq = np.hstack([prog.A_eq, np.zeros((prog.A_eq.shape[0], 1))])
    A_ub = None
    if prog.A_ub is not None:
        A_ub = np.hstack([prog.A_ub, -np.ones((prog.A_ub.shape[0], 1))])
    cones = [
        SocConstraint(np.hstack([k.F, np.zeros((k.F.shape[0], 1))]), k.g, np.r_[k.a, 1.0], k.b)
        for k in prog.cones
    ]
    lb = np.r_[prog.lb, 0.0]
    lb[n - 1] = 0.0  # tau
    return ConicProgram(c, A_eq, prog.b_eq, A_ub, prog.b_ub, cones, lb, np.r_[prog.ub, np.inf])


def _robust_score(table, category, t, sigma, spec) -> float:
    if len(category) == 1:
        # the target alone: eta_hat is the only point of the simplex
        return 1.0
    prog = robust_program(table, category, t, sigma, spec)
    try:
        return _score(prog)
    except SolverFailure:
        pass
    # Near a sigma where the score jumps to one, the feasible slice thins to
    # a point and no profile certifies the solve. Past the jump, the slack
    # program separates cleanly.
    STATS["violation_checks"] += 1
    out = solve_with_escalation(violation_program(prog))
    if out.value > VIOLATION_TOL * data_scale(table, category):
        return 1.0
    # Within rounding of the jump: try just above it, where the answer is one.
    sigma = np.asarray(sigma, dtype=float)
    for nudge in NUDGES:
        STATS["nudged"] += 1
        try:
            return _score(robust_program(table, category, t, sigma * (1.0 + nudge), spec))
        except SolverFailure:
            continue
    STATS["at_jump"] += 1
    return 1.0


def efficiency(table: CharacteristicTable, category: Sequence[int], t: int) -> float:
    """Nominal input-oriented VRS efficiency of object ``t`` against ``category``."""
    return _score_envelopment(envelopment_program(table, category, t, np.zeros(table.rows)))


def robust_efficiency(
    table: CharacteristicTable,
    category: Sequence[int],
    t: int,
    sigma,
    spec: UncertaintySpec | None = None,
) -> float:
    return _robust_score(table, category, t, sigma, spec)


def is_efficient(score: float, eps_eff: float = EPS_EFF) -> bool:
    """Six-decimal convention: 0.999999 counts as 1."""
    return score >= 1.0 - eps_eff


class ScoreCache:
    """Memo of robust efficiencies for one (table, category, spec), keyed by (t, sigma)."""

    def __init__(self, table, category, spec):
        self.table = table
        self.category = tuple(sorted(category))
        self.spec = spec
        self._memo: dict = {}

    def __call__(self, t: int, sigma: np.ndarray) -> float:
        key = (t, np.asarray(sigma, dtype=float).tobytes())
        hit = self._memo.get(key)
        if hit is None:
            hit = robust_efficiency(self.table, self.category, t, sigma, self.spec)
            self._memo[key] = hit
        return hit


def data_scale(table: CharacteristicTable, category: Sequence[int]) -> float:
    cat = sorted(category)
    return max(
        float(np.max(np.abs(table.inputs[:, cat]))),
        float(np.max(np.abs(table.outputs[:, cat]))),
        1e-12,
    )


def uniform_threshold(
    score,
    t: int,
    rows: int,
    scale: float,
    eps_eff: float = EPS_EFF,
    rel_tol: float = 1e-9,
) -> float:
    """Smallest rho (to ``rel_tol``) with the object efficient at sigma = rho * e.

    Doubling from 1e-3 * scale up to the cap 1e6 * scale, then bisection,
    which is valid because efficiency once reached persists as sigma grows.
    """
    ones = np.ones(rows)
    cap = 1e6 * scale
    hi = 1e-3 * scale
    lo = 0.0
    while not is_efficient(score(t, hi * ones), eps_eff):
        lo = hi
        hi *= 2.0
        if hi > cap:
            raise CapabilityNotReached(
                f"object {t} is not efficient at uniform sigma {cap:g}"
            )
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if is_efficient(score(t, mid * ones), eps_eff):
            hi = mid
        else:
            lo = mid
    return hi


def min_sigma_for_object(
    table: CharacteristicTable,
    category: Sequence[int],
    t: int,
    spec: UncertaintySpec | None = None,
    eps_eff: float = EPS_EFF,
    delta: float = 1e-3,
    max_iters: int = 100,
    score=None,
) -> np.ndarray:
    """Approximately minimal-norm sigma making object ``t`` robustly efficient.

    Starts from the minimal uniform sigma and refines it with the same
    first-order descent used for whole categories, applied to the single
    score E^t(sigma) with target 1 - eps_eff.
    """
    spec = spec or UncertaintySpec.identity()
    if score is None:
        score = ScoreCache(table, category, spec)
    rows = table.rows
    if is_efficient(score(t, np.zeros(rows)), eps_eff):
        return np.zeros(rows)
    rho = uniform_threshold(score, t, rows, data_scale(table, category), eps_eff)
    result = descend(
        lambda s: score(t, s),
        rho * (1.0 + BOUNDARY_MARGIN) * np.ones(rows),
        threshold=1.0 - eps_eff,
        delta=delta,
        max_iters=max_iters,
    )
    return result.sigma
