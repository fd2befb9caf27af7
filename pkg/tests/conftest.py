import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from equiclass import CharacteristicTable
from equiclass.dea import robust_efficiency

settings.register_profile(
    "equiclass", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("equiclass")


def random_table(rng, T, N=1, M=1, low=0.5, high=3.0):
    X = rng.uniform(low, high, size=(N, T))
    Y = rng.uniform(low, high, size=(M, T))
    return CharacteristicTable.from_arrays(X, Y)


def frontier_table(points):
    """1-input/1-output table from (input, output) pairs."""
    X = np.array([[p[0] for p in points]], dtype=float)
    Y = np.array([[p[1] for p in points]], dtype=float)
    return CharacteristicTable.from_arrays(X, Y)


def tier_points():
    base = [(1.0, 1.0), (2.0, 1.6), (3.0, 2.0)]
    pts = []
    for fx, fy in [(1.0, 1.0), (1.25, 0.8), (1.6, 0.6)]:
        pts += [(x * fx, y * fy) for x, y in base]
    return pts


def grid_proximity(table, category, sigma_hat, h=1e-3, eps_eff=1e-6):
    """Smallest ||sigma|| over the grid h*Z^2 within [0, sigma_hat] making every member efficient.

    Feasibility is an up-set (once efficient, an object stays efficient as
    sigma grows), so the feasible boundary is a staircase that one walk
    from the top-left corner traces.
    """
    cat = sorted(category)

    def feasible(a, b):
        s = np.array([a * h, b * h])
        return all(robust_efficiency(table, cat, t, s) >= 1 - eps_eff for t in cat)

    n1 = int(np.ceil(sigma_hat[0] / h))
    j = int(np.ceil(sigma_hat[1] / h))
    best = np.inf
    for i in range(n1 + 1):
        if not feasible(i, j):
            continue
        while j > 0 and feasible(i, j - 1):
            j -= 1
        best = min(best, h * np.hypot(i, j))
    return best


def set_partitions(items, k):
    """All partitions of ``items`` into exactly k nonempty blocks."""
    items = list(items)
    if k == 0:
        if not items:
            yield []
        return
    if len(items) < k:
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest, k - 1):
        yield [[first]] + part
    for part in set_partitions(rest, k):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def worked_table():
    return CharacteristicTable.from_arrays([[1.2, 0.8]], [[0.9, 0.5], [0.6, 0.7]])
