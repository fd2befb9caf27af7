import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from equiclass.descent import (
    backward_gradient,
    bisect_step,
    corner_direction,
    descend,
    direction_search,
    forward_gradient,
    step_bound,
)
from equiclass.solver import ConicProgram, SocConstraint, solve_with_escalation


def numeric_direction(sigma, grad):
    m = sigma.size
    ball = SocConstraint(np.eye(m), np.zeros(m), np.zeros(m), 1.0)
    prog = ConicProgram(sigma, A_ub=-grad[None, :], b_ub=np.zeros(1), cones=[ball], lb=-np.inf)
    return solve_with_escalation(prog).value


def test_zero_gradient_points_home():
    d, v = direction_search(np.array([3.0, 4.0]), np.zeros(2))
    assert np.allclose(d, [-0.6, -0.8])
    assert v == pytest.approx(-5.0)


def test_gradient_along_sigma_blocks_descent():
    d, v = direction_search(np.array([1.0, 0.0]), np.array([1.0, 0.0]))
    assert 0.0 <= v <= 1e-9
    assert np.array_equal(d, [0.0, 0.0])


def test_orthogonal_gradient():
    d, v = direction_search(np.array([1.0, 1.0]), np.array([1.0, -1.0]))
    assert np.allclose(d, -np.ones(2) / np.sqrt(2))
    assert v == pytest.approx(-np.sqrt(2))


vectors = st.lists(st.floats(-3, 3, allow_nan=False), min_size=2, max_size=4)


@given(st.integers(0, 2**32 - 1))
def test_closed_form_matches_conic_solve(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 5))
    sigma = rng.uniform(0, 2, m)
    grad = rng.normal(size=m)
    d, v = direction_search(sigma, grad)
    assert np.linalg.norm(d) <= 1 + 1e-12
    assert d @ grad >= -1e-12
    assert v == pytest.approx(numeric_direction(sigma, grad), abs=1e-6)


def test_corner_direction_respects_pins():
    sigma = np.array([1.0, 1.0])
    d, v = corner_direction(sigma, np.zeros(2), np.array([True, False]))
    assert d[0] >= -1e-7
    assert v == pytest.approx(-1.0, abs=1e-6)
    d, v = corner_direction(sigma, np.zeros(2), np.array([True, True]))
    assert 0.0 <= v <= 1e-9


def step_problem():
    """Feasible iff sigma_1 + sigma_2 >= 1 (a 0/1 indicator, like a jump to efficiency)."""
    return lambda s: 1.0 if s.sum() >= 1.0 - 1e-12 else 0.0


def test_backward_not_forward():
    f = step_problem()
    sigma = np.array([0.6, 0.4])
    assert np.all(forward_gradient(f, sigma, 1e-3) == 0.0)
    assert np.all(backward_gradient(f, sigma, 1e-3) > 0.0)


def test_zero_components_have_zero_gradient():
    f = step_problem()
    g = backward_gradient(f, np.array([1.0, 0.0]), 1e-3)
    assert g[1] == 0.0 and g[0] > 0


def test_step_bound_respects_floor_and_orthant():
    sigma = np.array([1.0, 1.0])
    d = -sigma / np.sqrt(2)
    assert step_bound(sigma, d, 0.0) == pytest.approx(np.sqrt(2))
    assert step_bound(sigma, d, 0.5) == pytest.approx(np.sqrt(2) - np.sqrt(0.5))
    d = np.array([-1.0, 0.0])
    assert step_bound(sigma, d, 0.0) == pytest.approx(1.0)


def test_radicand_clamped():
    sigma = np.array([1.0, 0.0])
    d = np.array([0.0, 1.0])
    assert step_bound(sigma, d, 2.0) == 0.0


def test_bisection_limits():
    assert bisect_step(lambda a: True, 2.0) == 2.0
    assert bisect_step(lambda a: a == 0.0, 2.0) == 0.0
    alpha = bisect_step(lambda a: a <= 0.7, 2.0, 1e-8)
    assert 0.7 - 2e-8 <= alpha <= 0.7


def test_descent_on_halfplane_reaches_projection():
    f = step_problem()
    res = descend(f, np.array([0.8, 0.6]), threshold=1.0)
    assert np.linalg.norm(res.sigma) == pytest.approx(np.sqrt(0.5), abs=2e-3)
    norms = [p[0] for p in res.trace]
    assert all(b < a for a, b in zip(norms, norms[1:]))
    assert all(p[1] >= 1.0 for p in res.trace)
    assert res.final_direction_value >= -1e-9


def test_zero_component_cannot_grow():
    # the gradient is blind along a zero component, so the start is already stationary
    res = descend(step_problem(), np.array([1.0, 0.0]), threshold=1.0)
    assert res.exit_reason == "converged"
    assert np.array_equal(res.sigma, [1.0, 0.0])


def test_descent_at_corner_certifies():
    # feasible iff both coordinates are at least 0.5: the start is the corner itself
    f = lambda s: float(np.all(s >= 0.5 - 1e-12))
    res = descend(f, np.array([0.5, 0.5]), threshold=1.0)
    assert res.exit_reason in ("converged", "converged_at_corner")
    assert res.final_direction_value >= -1e-9
    assert np.allclose(res.sigma, [0.5, 0.5])
