"""First-order descent on ||sigma|| over the region where a score sum stays feasible.

The same engine serves the per-object problem (score = one robust
efficiency, target 1) and the per-category problem (score = sum of robust
efficiencies, target = category size).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from equiclass.solver import ConicProgram, SocConstraint, solve_with_escalation

TERMINATION_TOL = 1e-9
# relative distance kept between an accepted iterate and the feasibility boundary
BOUNDARY_MARGIN = 1e-6


@dataclass(frozen=True, eq=False)
class DescentResult:
    sigma: np.ndarray
    trace: tuple
    exit_reason: str
    final_direction_value: float | None
    iterations: int


def _backward(evaluate, sigma, delta, value):
    grad = np.zeros_like(sigma)
    lowered = np.full(sigma.size, value)
    for i in range(sigma.size):
        h = min(delta, sigma[i])
        if h <= 0:
            continue
        shifted = sigma.copy()
        shifted[i] = sigma[i] - h
        if shifted[i] < h * 1e-12:
            shifted[i] = 0.0
        lowered[i] = evaluate(shifted)
        grad[i] = (value - lowered[i]) / h
    return grad, lowered


def backward_gradient(
    evaluate: Callable[[np.ndarray], float],
    sigma: np.ndarray,
    delta: float,
    value: float | None = None,
) -> np.ndarray:
    """Componentwise (f(sigma) - f(sigma - h e_i)) / h with h = min(delta, sigma_i).

    Components already at zero get a zero entry since f is undefined for
    negative sigma.
    """
    if value is None:
        value = evaluate(sigma)
    return _backward(evaluate, sigma, delta, value)[0]


def forward_gradient(evaluate, sigma: np.ndarray, delta: float, value: float | None = None) -> np.ndarray:
    """Forward differences; kept only to demonstrate why they are not used."""
    if value is None:
        value = evaluate(sigma)
    grad = np.zeros_like(sigma)
    for i in range(sigma.size):
        shifted = sigma.copy()
        shifted[i] += delta
        grad[i] = (evaluate(shifted) - value) / delta
    return grad


def direction_search(sigma: np.ndarray, grad: np.ndarray) -> tuple[np.ndarray, float]:
    """Closed-form solution of min{d.sigma : d.grad >= 0, d.d <= 1}."""
    sigma = np.asarray(sigma, dtype=float)
    grad = np.asarray(grad, dtype=float)
    norm = float(np.linalg.norm(sigma))
    if norm == 0.0:
        return np.zeros_like(sigma), 0.0
    gs = float(grad @ sigma)
    if gs <= 0.0:
        d = -sigma / norm
        return d, -norm
    gg = float(grad @ grad)
    proj = -sigma + (gs / gg) * grad
    pnorm = float(np.linalg.norm(proj))
    if pnorm <= 1e-12 * norm:
        return np.zeros_like(sigma), 0.0
    d = proj / pnorm
    return d, float(d @ sigma)


def corner_direction(
    sigma: np.ndarray, grad: np.ndarray, pinned: np.ndarray
) -> tuple[np.ndarray, float]:
    """min{d.sigma : d.grad >= 0, d_i >= 0 for pinned i, d.d <= 1}, solved as a small SOCP.

    Used after a stalled line search: coordinates whose backward step
    already breaks feasibility are not allowed to decrease.
    """
    m = sigma.size
    rows = [-np.asarray(grad, dtype=float)]
    rows.extend(-np.eye(m)[i] for i in np.flatnonzero(pinned))
    A_ub = np.vstack(rows)
    ball = SocConstraint(np.eye(m), np.zeros(m), np.zeros(m), 1.0)
    prog = ConicProgram(sigma, A_ub=A_ub, b_ub=np.zeros(len(rows)), cones=[ball], lb=-np.inf)
    out = solve_with_escalation(prog)
    d = out.solution
    value = float(d @ sigma)
    if value >= -TERMINATION_TOL:
        return np.zeros_like(sigma), max(value, 0.0)
    return d / max(1.0, float(np.linalg.norm(d))), value


def step_bound(sigma: np.ndarray, d: np.ndarray, floor_sq: float) -> float:
    """Largest step keeping ||sigma + a d||^2 >= floor_sq and sigma + a d >= 0."""
    sd = float(sigma @ d)
    radicand = sd * sd - (float(sigma @ sigma) - floor_sq)
    alpha = -sd - math.sqrt(max(radicand, 0.0))
    neg = d < 0
    if np.any(neg):
        alpha = min(alpha, float(np.min(sigma[neg] / -d[neg])))
    return max(alpha, 0.0)


def bisect_step(
    feasible: Callable[[float], bool], alpha_max: float, resolution: float = 1e-8
) -> float:
    """Largest alpha in [0, alpha_max] that ``feasible`` accepts, to ``resolution * alpha_max``."""
    if alpha_max <= 0.0:
        return 0.0
    if feasible(alpha_max):
        return alpha_max
    lo, hi = 0.0, alpha_max
    while hi - lo > resolution * alpha_max:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _snap(sigma: np.ndarray) -> np.ndarray:
    """Clear components left at rounding level by a step that drove them to zero."""
    out = np.maximum(sigma, 0.0)
    out[out <= 1e-9 * max(float(np.max(out, initial=0.0)), 1e-300)] = 0.0
    return out


def descend(
    evaluate: Callable[[np.ndarray], float],
    sigma0: np.ndarray,
    threshold: float,
    floor_sq: float = 0.0,
    delta: float = 1e-3,
    max_iters: int = 100,
    resolution: float = 1e-8,
) -> DescentResult:
    """Reduce ||sigma|| from a feasible start while ``evaluate(sigma) >= threshold``.

    Each iteration takes a backward-difference gradient, the closed-form
    descent direction, and a bisection step bounded by ``floor_sq`` (the
    squared lower bound on the norm). The loop exits when the direction
    value is nonnegative or after ``max_iters``.

    The score jumps rather than slopes at most feasibility boundaries, so a
    sigma can sit in a corner where every norm-reducing direction leaves the
    feasible set although the single gradient constraint admits one. When a
    line search returns no step, the direction is recomputed with the
    coordinates whose backward step broke feasibility pinned (see
    :func:`corner_direction`); a nonnegative value there ends the loop, and
    a second failed step ends it as ``stalled``.
    """
    sigma = _snap(np.array(sigma0, dtype=float))
    value = evaluate(sigma)
    trace = [(float(np.linalg.norm(sigma)), float(value))]
    exit_reason = "iteration_limit"
    dval = None
    steps = 0
    for _ in range(max_iters):
        h = delta * max(1.0, float(np.max(sigma, initial=0.0)))
        grad, lowered = _backward(evaluate, sigma, h, value)
        d, dval = direction_search(sigma, grad)
        if dval >= -TERMINATION_TOL:
            exit_reason = "converged"
            break

        def try_step(direction):
            alpha_max = step_bound(sigma, direction, floor_sq)

            def feasible(alpha):
                return evaluate(_snap(sigma + alpha * direction)) >= threshold

            alpha = bisect_step(feasible, alpha_max, resolution)
            if alpha < alpha_max:
                # Bisection stopped within resolution of a score jump, where
                # solves are unreliable; back off so that later moves along the
                # boundary stay inside. Steps ended by the norm floor or by
                # sigma >= 0 are taken in full.
                backed = alpha - BOUNDARY_MARGIN * float(np.linalg.norm(sigma))
                if backed > 0.5 * alpha and feasible(backed):
                    alpha = backed
            cand = _snap(sigma + alpha * direction)
            if alpha <= 0.0 or np.linalg.norm(cand) >= np.linalg.norm(sigma):
                return None
            return cand

        candidate = try_step(d)
        if candidate is None:
            pinned = (sigma > 0) & (lowered < threshold)
            d, dval = corner_direction(sigma, grad, pinned)
            if dval >= -TERMINATION_TOL:
                exit_reason = "converged_at_corner"
                break
            candidate = try_step(d)
            if candidate is None:
                exit_reason = "stalled"
                break
        sigma = candidate
        value = evaluate(sigma)
        steps += 1
        trace.append((float(np.linalg.norm(sigma)), float(value)))
    return DescentResult(sigma, tuple(trace), exit_reason, dval, steps)
