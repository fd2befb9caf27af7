"""Conic (LP/SOCP) solving behind one interface, plus a small binary branch-and-bound.

Linear programs go to HiGHS through :func:`scipy.optimize.linprog`; programs
with second-order-cone rows go to Clarabel. Every solve is checked
independently of the backend: primal residuals must be at most 1e-8 and the
objective must be trusted to at least six decimals, otherwise the next
tolerance profile is tried.
"""

from __future__ import annotations

import heapq
import functools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import clarabel
import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from equiclass.errors import SolverFailure

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERIC_FAILURE = "numeric_failure"

RESIDUAL_TOL = 1e-8
MIN_CERTIFIED_DIGITS = 6

# Escalation ladder, strictest first. Robust efficiency jumps to one at
# threshold sigmas, where the cone program is degenerate; regularization and
# disabling equilibration are what usually rescue those solves.
PROFILES = (
    ("strict", dict(gap=1e-10, feas=1e-10, max_iter=200)),
    ("regularized", dict(gap=1e-10, feas=1e-10, max_iter=400, static_reg=1e-7)),
    ("unequilibrated", dict(gap=1e-9, feas=1e-10, max_iter=400, equilibrate=False)),
    ("relaxed", dict(gap=1e-8, feas=1e-9, max_iter=1000, static_reg=1e-7, equilibrate=False)),
)

# Per-process counters; worker pools ship deltas back to the parent.
STATS: Counter = Counter()


def reset_stats() -> None:
    STATS.clear()


@dataclass(frozen=True, eq=False)
class SocConstraint:
    """||F x + g|| <= a.x + b."""

    F: np.ndarray
    g: np.ndarray
    a: np.ndarray
    b: float = 0.0


@dataclass(eq=False)
class ConicProgram:
    """min c.x subject to equalities, inequalities, cone rows and bounds."""

    c: np.ndarray
    A_eq: object = None
    b_eq: np.ndarray | None = None
    A_ub: object = None
    b_ub: np.ndarray | None = None
    cones: list = field(default_factory=list)
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        if self.lb is None:
            self.lb = np.zeros(n)
        self.lb = np.broadcast_to(np.asarray(self.lb, dtype=float), (n,)).copy()
        if self.ub is None:
            self.ub = np.full(n, np.inf)
        self.ub = np.broadcast_to(np.asarray(self.ub, dtype=float), (n,)).copy()
        for name in ("A_eq", "A_ub"):
            mat = getattr(self, name)
            if mat is not None and mat.shape[1] != n:
                raise ValueError(f"{name} has {mat.shape[1]} columns, expected {n}")
        for cone in self.cones:
            if cone.F.shape[1] != n or cone.a.size != n:
                raise ValueError("cone constraint has the wrong number of columns")

    @property
    def n(self) -> int:
        return self.c.size

    def primal_residual(self, x: np.ndarray) -> float:
        """Largest violation of any constraint at ``x``."""
        worst = 0.0
        if self.A_eq is not None:
            worst = max(worst, float(np.max(np.abs(self.A_eq @ x - self.b_eq), initial=0.0)))
        if self.A_ub is not None:
            worst = max(worst, float(np.max(self.A_ub @ x - self.b_ub, initial=0.0)))
        for cone in self.cones:
            lhs = np.linalg.norm(cone.F @ x + cone.g)
            worst = max(worst, lhs - (cone.a @ x + cone.b))
        worst = max(worst, float(np.max(self.lb - x, initial=0.0)))
        worst = max(worst, float(np.max(x - self.ub, initial=0.0)))
        return worst


@dataclass(frozen=True, eq=False)
class SolveOutcome:
    status: str
    value: float | None = None
    solution: np.ndarray | None = None
    certified_digits: int = 0
    profile: str | None = None
    residual: float | None = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _digits(err: float) -> int:
    err = max(abs(err), 1e-16)
    return int(min(16, math.floor(-math.log10(err))))


def _rhs_scale(prog: ConicProgram) -> float:
    scale = 1.0
    for vec in (prog.b_eq, prog.b_ub):
        if vec is not None and np.size(vec):
            scale = max(scale, float(np.max(np.abs(vec))))
    return scale


def _solve_lp(prog: ConicProgram, profile) -> SolveOutcome:
    name, opts = profile
    feas_tol = opts["feas"]
    bounds = np.column_stack([
        np.where(np.isfinite(prog.lb), prog.lb, -np.inf),
        np.where(np.isfinite(prog.ub), prog.ub, np.inf),
    ])
    bounds = [(lo if np.isfinite(lo) else None, hi if np.isfinite(hi) else None)
              for lo, hi in bounds]
    options = {
        "primal_feasibility_tolerance": max(feas_tol, 1e-10),
        "dual_feasibility_tolerance": max(feas_tol, 1e-10),
    }
    # dual simplex without presolve is fastest on the small dense programs here;
    # later profiles let HiGHS presolve and pick its own method
    strict = name == PROFILES[0][0]
    if strict:
        options["presolve"] = False
    res = linprog(
        prog.c, A_ub=prog.A_ub, b_ub=prog.b_ub, A_eq=prog.A_eq, b_eq=prog.b_eq,
        bounds=bounds, method="highs-ds" if strict else "highs", options=options,
    )
    if res.status == 2:
        return SolveOutcome(INFEASIBLE, profile=name)
    if res.status == 3:
        return SolveOutcome(UNBOUNDED, profile=name)
    if res.status != 0:
        return SolveOutcome(NUMERIC_FAILURE, profile=name)
    x = np.asarray(res.x, dtype=float)
    value = float(prog.c @ x)
    dual = 0.0
    if prog.A_eq is not None:
        dual += float(np.dot(prog.b_eq, res.eqlin.marginals))
    if prog.A_ub is not None:
        dual += float(np.dot(prog.b_ub, res.ineqlin.marginals))
    lo_m = np.asarray(res.lower.marginals)
    hi_m = np.asarray(res.upper.marginals)
    fin_lo = np.isfinite(prog.lb)
    fin_hi = np.isfinite(prog.ub)
    dual += float(np.dot(prog.lb[fin_lo], lo_m[fin_lo])) + float(np.dot(prog.ub[fin_hi], hi_m[fin_hi]))
    gap = abs(value - dual) / (1.0 + abs(value))
    residual = prog.primal_residual(x)
    return SolveOutcome(OPTIMAL, value, x, _digits(max(gap, residual)), name, residual)


@functools.lru_cache(maxsize=64)
def _zero_quadratic(n: int):
    return sp.csc_matrix((n, n))


def _dense(mat) -> np.ndarray:
    return mat.toarray() if sp.issparse(mat) else np.asarray(mat, dtype=float)


def _clarabel_data(prog: ConicProgram):
    """Stack everything as Clarabel's ``A x + s = b, s in K`` (dense rows, one conversion)."""
    blocks, rhs, cones = [], [], []
    n = prog.n
    if prog.A_eq is not None and prog.A_eq.shape[0]:
        blocks.append(_dense(prog.A_eq))
        rhs.append(np.asarray(prog.b_eq, dtype=float))
        cones.append(clarabel.ZeroConeT(prog.A_eq.shape[0]))
    n_lin = 0
    if prog.A_ub is not None and prog.A_ub.shape[0]:
        blocks.append(_dense(prog.A_ub))
        rhs.append(np.asarray(prog.b_ub, dtype=float))
        n_lin += prog.A_ub.shape[0]
    eye = np.eye(n)
    fin_lo = np.flatnonzero(np.isfinite(prog.lb))
    if fin_lo.size:
        blocks.append(-eye[fin_lo])
        rhs.append(-prog.lb[fin_lo])
        n_lin += fin_lo.size
    fin_hi = np.flatnonzero(np.isfinite(prog.ub))
    if fin_hi.size:
        blocks.append(eye[fin_hi])
        rhs.append(prog.ub[fin_hi])
        n_lin += fin_hi.size
    if n_lin:
        cones.append(clarabel.NonnegativeConeT(n_lin))
    for cone in prog.cones:
        blocks.append(-np.asarray(cone.a, dtype=float).reshape(1, -1))
        blocks.append(-np.asarray(cone.F, dtype=float))
        rhs.append(np.concatenate([[cone.b], cone.g]))
        cones.append(clarabel.SecondOrderConeT(cone.F.shape[0] + 1))
    return sp.csc_matrix(np.vstack(blocks)), np.concatenate(rhs), cones


def _solve_socp(prog: ConicProgram, profile) -> SolveOutcome:
    name, opts = profile
    A, b, cones = _clarabel_data(prog)
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = opts["gap"]
    settings.tol_gap_rel = opts["gap"]
    settings.tol_feas = opts["feas"]
    settings.max_iter = opts["max_iter"]
    if "static_reg" in opts:
        settings.static_regularization_constant = opts["static_reg"]
    if not opts.get("equilibrate", True):
        settings.equilibrate_enable = False
    P = _zero_quadratic(prog.n)
    sol = clarabel.DefaultSolver(P, prog.c, A, b, cones, settings).solve()
    status = str(sol.status)
    if status.endswith("PrimalInfeasible"):
        return SolveOutcome(INFEASIBLE, profile=name)
    if status.endswith("DualInfeasible"):
        return SolveOutcome(UNBOUNDED, profile=name)
    if not status.endswith("Solved"):  # includes AlmostSolved
        return SolveOutcome(NUMERIC_FAILURE, profile=name)
    x = np.asarray(sol.x, dtype=float)
    value = float(prog.c @ x)
    gap = abs(sol.obj_val - sol.obj_val_dual)
    residual = prog.primal_residual(x)
    return SolveOutcome(OPTIMAL, value, x, _digits(max(gap, residual)), name, residual)


def solve_conic(prog: ConicProgram, profile: str | int = "strict") -> SolveOutcome:
    """Solve once with a single tolerance profile.

    An outcome that the backend calls optimal but that fails the residual or
    certified-digit checks is reported as ``numeric_failure``.
    """
    if isinstance(profile, str):
        profile = next(p for p in PROFILES if p[0] == profile)
    else:
        profile = PROFILES[profile]
    STATS["solves"] += 1
    out = _solve_socp(prog, profile) if prog.cones else _solve_lp(prog, profile)
    if out.optimal:
        limit = RESIDUAL_TOL * _rhs_scale(prog)
        if out.residual > limit or out.certified_digits < MIN_CERTIFIED_DIGITS:
            return SolveOutcome(NUMERIC_FAILURE, profile=out.profile, residual=out.residual)
    return out


def solve_with_escalation(prog: ConicProgram) -> SolveOutcome:
    """Walk the tolerance ladder from strictest to most relaxed profile."""
    out = None
    for k, profile in enumerate(PROFILES):
        if k:
            STATS["retries"] += 1
        out = solve_conic(prog, profile[0])
        if out.status != NUMERIC_FAILURE:
            return out
    STATS["failures"] += 1
    raise SolverFailure("no tolerance profile certified the solve", out.status)


def solve_binary_program(
    c,
    A_eq=None,
    b_eq=None,
    A_ub=None,
    b_ub=None,
    incumbent: np.ndarray | None = None,
    int_tol: float = 1e-6,
    max_nodes: int = 200_000,
) -> SolveOutcome:
    """Exact best-first branch-and-bound for ``min c.x`` over binary ``x``.

    The most fractional variable is branched on (ties to the lowest index)
    and open nodes are ordered by LP bound, then creation order, so the
    search is deterministic. ``incumbent`` is an optional feasible binary
    point used as the initial upper bound.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    best_x, best_val = None, math.inf
    if incumbent is not None:
        best_x = np.asarray(incumbent, dtype=float)
        best_val = float(c @ best_x)

    def relax(lo, hi):
        prog = ConicProgram(c, A_eq, b_eq, A_ub, b_ub, lb=lo, ub=hi)
        return solve_with_escalation(prog)

    root_lo, root_hi = np.zeros(n), np.ones(n)
    root = relax(root_lo, root_hi)
    if root.status == INFEASIBLE:
        if best_x is not None:
            return SolveOutcome(OPTIMAL, best_val, best_x, 16, "bnb")
        return SolveOutcome(INFEASIBLE)
    counter = 0
    heap = [(root.value, counter, root_lo, root_hi, root.solution)]
    nodes = 0
    while heap:
        bound, _, lo, hi, x = heapq.heappop(heap)
        if bound >= best_val - 1e-9:
            break
        nodes += 1
        if nodes > max_nodes:
            raise SolverFailure("branch-and-bound node limit reached")
        frac = np.abs(x - np.round(x))
        if frac.max() <= int_tol:
            xr = np.round(x)
            val = float(c @ xr)
            if val < best_val - 1e-12:
                best_x, best_val = xr, val
            continue
        k = int(np.argmax(frac))  # argmax returns the lowest index on ties
        for fix in (1.0, 0.0):
            clo, chi = lo.copy(), hi.copy()
            clo[k] = chi[k] = fix
            child = relax(clo, chi)
            if child.status != OPTIMAL or child.value >= best_val - 1e-9:
                continue
            counter += 1
            heapq.heappush(heap, (child.value, counter, clo, chi, child.solution))
    STATS["bnb_nodes"] += nodes
    if best_x is None:
        return SolveOutcome(INFEASIBLE)
    return SolveOutcome(OPTIMAL, best_val, best_x, 16, "bnb", 0.0)
