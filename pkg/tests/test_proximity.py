import math

import numpy as np
import pytest

from equiclass.dea import min_sigma_for_object, robust_efficiency
from equiclass.proximity import (
    ProximityBook,
    ProximitySettings,
    gamma,
    gamma_gradient,
    line_search,
    proximity,
    sigma_hat,
)

from conftest import frontier_table, grid_proximity

# one dominated object: (2, 1.0) sits below the segment between the other two
ONE_BAD = frontier_table([(1.0, 1.0), (2.0, 1.6), (2.0, 1.0)])
# sigma_hat takes its two components from different members
TWO_BAD = frontier_table([
    (0.659823694104981, 1.4964358755396705),
    (0.9597159798931846, 1.1910399163187593),
    (0.554668061401838, 0.5340502789470376),
    (1.3458901064450575, 1.0878819406668605),
])
# the minimiser lies outside the box [0, sigma_hat]
ESCAPES = frontier_table([
    (1.374850653338439, 1.4149971176075908),
    (0.8651054283096024, 1.3873726591779965),
    (1.4291243083646292, 0.9066140137839536),
    (1.2460731617010243, 0.8653423464110785),
])
THREE = frontier_table([(1.0, 1.0), (2.0, 1.2), (1.5, 0.7)])


def test_small_categories_are_free():
    pair = frontier_table([(1.0, 2.0), (2.0, 1.0)])
    res = proximity(pair, (0, 1))
    assert res.estimate == 0.0 and res.trace == ()
    assert res.flags == ("pair_with_inefficient_member",)
    assert proximity(pair, (1,)).estimate == 0.0
    assert np.array_equal(sigma_hat(pair, (0, 1)), [0.0, 0.0])


def test_efficient_pair_not_flagged():
    pair = frontier_table([(1.0, 1.0), (2.0, 2.0)])
    assert proximity(pair, (0, 1)).flags == ()


def test_single_inefficient_object_decides():
    res = proximity(ONE_BAD, (0, 1, 2))
    own = min_sigma_for_object(ONE_BAD, (0, 1, 2), 2)
    assert res.decided_by_single_object
    assert res.exit_reason == "single_object"
    assert np.array_equal(res.sigma_hat, own)
    assert res.estimate == res.upper_bound == float(np.linalg.norm(own))


def test_bounds_and_oracle_three_objects():
    res = proximity(THREE, (0, 1, 2))
    assert res.lower_bound == pytest.approx(res.upper_bound / math.sqrt(2), rel=1e-12)
    assert res.lower_bound - 1e-9 <= res.estimate <= res.upper_bound + 1e-9
    assert abs(res.estimate - grid_proximity(THREE, (0, 1, 2), res.sigma_hat)) <= 2e-3


def test_descent_beats_upper_bound_and_matches_oracle():
    res = proximity(TWO_BAD, range(4))
    assert not res.decided_by_single_object
    assert res.estimate < res.upper_bound - 1e-3
    assert res.final_direction_value >= -1e-9
    norms = [p[0] for p in res.trace]
    assert all(b < a for a, b in zip(norms, norms[1:]))
    assert all(p[1] >= 4 - 1e-4 for p in res.trace)
    assert abs(res.estimate - grid_proximity(TWO_BAD, range(4), res.sigma_hat)) <= 2e-3


def test_descent_may_leave_the_sigma_hat_box():
    res = proximity(ESCAPES, range(4))
    box = grid_proximity(ESCAPES, range(4), res.sigma_hat)
    assert res.sigma[0] > res.sigma_hat[0]
    # the box oracle only bounds the true proximity from above
    assert res.estimate < box - 2e-3
    assert all(robust_efficiency(ESCAPES, range(4), t, res.sigma) >= 1 - 1e-4 for t in range(4))


def test_gamma_nominal_shortfall():
    # (1.875, 1.5) needs input 1.5 on the frontier through (1,1) and (2,2): score 0.8
    table = frontier_table([(1.0, 1.0), (2.0, 2.0), (1.875, 1.5)])
    ev = gamma(table, (0, 1, 2), [0.0, 0.0])
    assert ev.gamma == pytest.approx(2.8, abs=1e-3)
    assert ev.per_object_scores[2] == pytest.approx(0.8, abs=1e-6)


def test_gamma_all_efficient_and_far_out():
    table = frontier_table([(1.0, 1.0), (2.0, 1.6), (3.0, 2.0)])
    assert gamma(table, (0, 1, 2), [0.0, 0.0]).gamma == pytest.approx(3.0, abs=1e-6)
    hat = sigma_hat(TWO_BAD, range(4))
    assert gamma(TWO_BAD, range(4), 10 * hat).gamma >= 4 - 1e-4


def test_gradient_constant_region_is_zero():
    table = frontier_table([(1.0, 1.0), (2.0, 1.6), (3.0, 2.0)])
    g = gamma_gradient(table, (0, 1, 2), [0.2, 0.2], 1e-3)
    assert np.allclose(g, 0.0, atol=1e-6)


def test_gradient_positive_at_boundary():
    hat = sigma_hat(TWO_BAD, range(4))
    g = gamma_gradient(TWO_BAD, range(4), hat, 1e-3)
    assert np.max(g) > 0


def test_line_search_limits():
    table = frontier_table([(1.0, 1.0), (2.0, 1.6), (3.0, 2.0)])
    sigma = np.array([0.3, 0.4])
    d = -sigma / 0.5
    assert line_search(table, (0, 1, 2), sigma, d, 0.0) == pytest.approx(0.5)
    # from half of sigma_hat the dominated object is far from efficient everywhere along d
    half = 0.5 * sigma_hat(ONE_BAD, (0, 1, 2))
    d = -half / np.linalg.norm(half)
    assert line_search(ONE_BAD, (0, 1, 2), half, d, 0.0) == 0.0


def test_line_search_interior_step():
    hat = sigma_hat(TWO_BAD, range(4))
    d = np.array([-1.0, 0.0])
    alpha = line_search(TWO_BAD, range(4), hat, d, 0.0)
    upper = hat[0]
    assert 0.0 < alpha < upper
    assert gamma(TWO_BAD, range(4), hat + alpha * d).gamma >= 4 - 1e-4
    # dense grid oracle at 1e-4 resolution: nothing feasible beyond alpha + 1e-4
    for a in np.arange(alpha + 1e-4, min(alpha + 2e-3, upper), 1e-4):
        assert gamma(TWO_BAD, range(4), hat + a * d).gamma < 4 - 1e-4


def test_settings_validation():
    with pytest.raises(ValueError):
        ProximitySettings(epsilon=0.0)
    with pytest.raises(ValueError):
        ProximitySettings(max_iters=0)


def test_book_reuses_results():
    book = ProximityBook(ONE_BAD)
    first = book[(2, 0, 1)]
    assert book[(0, 1, 2)] is first
    assert len(book.results) == 1
