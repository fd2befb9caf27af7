import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from equiclass import CharacteristicTable
from equiclass.assembly import build_blocks
from equiclass.errors import SolverFailure
from equiclass.solver import (
    INFEASIBLE,
    OPTIMAL,
    ConicProgram,
    SocConstraint,
    solve_binary_program,
    solve_conic,
    solve_with_escalation,
)


def test_trivial_lp():
    out = solve_conic(ConicProgram(np.array([1.0]), A_ub=-np.eye(1), b_ub=np.array([-3.0])))
    assert out.status == OPTIMAL
    assert out.value == pytest.approx(3.0, abs=1e-9)
    assert out.certified_digits >= 6


def test_infeasible_lp():
    out = solve_conic(ConicProgram(np.array([1.0]), A_ub=np.eye(1), b_ub=np.array([-1.0])))
    assert out.status == INFEASIBLE


def test_singleton_category_lp_is_one():
    table = CharacteristicTable.from_arrays([[2.0]], [[3.0]])
    b = build_blocks(table, (0,), 0)
    out = solve_with_escalation(
        ConicProgram(b.c, b.B, np.ones(2), b.A, np.zeros(b.A.shape[0]))
    )
    assert out.value == pytest.approx(1.0, abs=1e-9)


def test_small_socp():
    # min x + y  s.t.  ||(x - 1, y - 1)|| <= 1  ->  2 - sqrt(2)
    cone = SocConstraint(np.eye(2), -np.ones(2), np.zeros(2), 1.0)
    out = solve_with_escalation(ConicProgram(np.ones(2), cones=[cone], lb=-np.inf))
    assert out.status == OPTIMAL
    assert out.value == pytest.approx(2 - np.sqrt(2), abs=1e-7)


@given(st.integers(0, 2**32 - 1))
def test_lp_duality_gap_is_certified(seed):
    rng = np.random.default_rng(seed)
    m, n = 4, 6
    A = rng.normal(size=(m, n))
    x0 = rng.uniform(0.1, 1.0, n)
    prog = ConicProgram(rng.uniform(0.1, 2.0, n), A_ub=A, b_ub=A @ x0 + 0.1)
    out = solve_conic(prog)
    assert out.status == OPTIMAL
    assert out.certified_digits >= 8
    assert prog.primal_residual(out.solution) <= 1e-8


def test_assignment_two_by_two():
    D = np.array([[0.0, 5.0], [5.0, 0.0]])
    # x_ij: item i in slot j, each item and slot used once
    c = D.ravel()
    A_eq = np.array([[1, 1, 0, 0], [0, 0, 1, 1], [1, 0, 1, 0], [0, 1, 0, 1]], float)
    out = solve_binary_program(c, A_eq, np.ones(4))
    assert out.value == pytest.approx(0.0, abs=1e-9)


def test_binary_infeasible():
    out = solve_binary_program(np.ones(2), np.array([[1.0, 1.0]]), np.array([3.0]))
    assert out.status == INFEASIBLE


def _brute(c, A_ub, b_ub, A_eq, b_eq):
    best = None
    for bits in itertools.product((0.0, 1.0), repeat=c.size):
        x = np.array(bits)
        if np.all(A_ub @ x <= b_ub + 1e-9) and np.all(np.abs(A_eq @ x - b_eq) <= 1e-9):
            v = float(c @ x)
            best = v if best is None else min(best, v)
    return best


@pytest.mark.parametrize("seed", range(50))
def test_branch_and_bound_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 13))
    c = rng.normal(size=n)
    A_ub = rng.integers(-2, 4, size=(3, n)).astype(float)
    b_ub = rng.integers(1, 6, size=3).astype(float)
    A_eq = np.ones((1, n))
    b_eq = np.array([float(rng.integers(1, n))])
    expected = _brute(c, A_ub, b_ub, A_eq, b_eq)
    out = solve_binary_program(c, A_eq, b_eq, A_ub, b_ub)
    if expected is None:
        assert out.status == INFEASIBLE
    else:
        assert out.status == OPTIMAL
        assert out.value == pytest.approx(expected, abs=1e-7)
        assert set(np.unique(out.solution)) <= {0.0, 1.0}


def test_unbounded_is_never_optimal():
    cone = SocConstraint(np.eye(1), np.zeros(1), np.ones(1), 0.0)
    try:
        out = solve_with_escalation(ConicProgram(-np.ones(1), cones=[cone]))
    except SolverFailure:
        return
    assert out.status != OPTIMAL
