"""Initial classification: p-median over per-object uncertainty norms, one solve per size multiset."""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from equiclass.dea import min_sigma_for_object
from equiclass.errors import InfeasibleSizes, SolverFailure
from equiclass.model import CharacteristicTable, Classification, UncertaintySpec
from equiclass.proximity import DEFAULT_SETTINGS, ProximityBook, ProximitySettings
from equiclass.solver import OPTIMAL, solve_binary_program


def _object_sigma_task(args):
    table, t, spec, settings = args
    return min_sigma_for_object(
        table, range(table.T), t, spec, settings.eps_eff, settings.delta, settings.max_iters
    )


def object_norms(
    table: CharacteristicTable,
    spec: UncertaintySpec | None = None,
    settings: ProximitySettings = DEFAULT_SETTINGS,
    pool=None,
) -> np.ndarray:
    """||sigma^t|| for every object, each measured against the whole object set."""
    tasks = [(table, t, spec, settings) for t in range(table.T)]
    sigmas = pool.map(_object_sigma_task, tasks) if pool else [_object_sigma_task(a) for a in tasks]
    return np.array([float(np.linalg.norm(s)) for s in sigmas])


def distances_from_norms(norms) -> np.ndarray:
    norms = np.asarray(norms, dtype=float)
    return np.abs(norms[:, None] - norms[None, :])


def pairwise_distances(
    table: CharacteristicTable,
    spec: UncertaintySpec | None = None,
    settings: ProximitySettings = DEFAULT_SETTINGS,
    pool=None,
) -> np.ndarray:
    """d(i, j) = | ||sigma^i|| - ||sigma^j|| |."""
    return distances_from_norms(object_norms(table, spec, settings, pool))


def enumerate_size_multisets(T: int, S: int) -> list[tuple[int, ...]]:
    """All nondecreasing tuples of S parts, each at least 2, summing to T, in lexicographic order."""
    if S < 1:
        raise InfeasibleSizes("at least one category is required")
    if T < 2 * S:
        raise InfeasibleSizes(f"{T} objects cannot fill {S} categories of size >= 2")

    def parts(total, count, smallest):
        if count == 1:
            if total >= smallest:
                yield (total,)
            return
        for first in range(smallest, total // count + 1):
            for rest in parts(total - first, count - 1, first):
                yield (first,) + rest

    return list(parts(T, S, 2))


@dataclass(frozen=True)
class PMedianLayout:
    """Column layout: zeta[i, j] at i*T + j, then omega[j, k] at T*T + j*K + k."""

    T: int
    unique_sizes: tuple[int, ...]

    @property
    def K(self) -> int:
        return len(self.unique_sizes)

    @property
    def n(self) -> int:
        return self.T * self.T + self.T * self.K

    def zeta(self, i: int, j: int) -> int:
        return i * self.T + j

    def omega(self, j: int, k: int) -> int:
        return self.T * self.T + j * self.K + k


def pmedian_program(distances, sizes):
    """(c, A_eq, b_eq, A_ub, b_ub, layout) of the cardinality-constrained p-median.

    zeta[i, j] = 1 assigns object i to median j and zeta[j, j] opens j.
    omega[j, k] = 1 gives median j a category of the k-th distinct size, and
    each distinct size is used as many times as it occurs in ``sizes``.
    """
    D = np.asarray(distances, dtype=float)
    T = D.shape[0]
    unique = tuple(sorted(set(sizes)))
    counts = [list(sizes).count(p) for p in unique]
    L = PMedianLayout(T, unique)
    c = np.zeros(L.n)
    for i in range(T):
        for j in range(T):
            c[L.zeta(i, j)] = D[i, j]

    eq, beq = [], []
    for i in range(T):
        row = np.zeros(L.n)
        row[[L.zeta(i, j) for j in range(T)]] = 1.0
        eq.append(row)
        beq.append(1.0)
    row = np.zeros(L.n)
    row[[L.zeta(j, j) for j in range(T)]] = 1.0
    eq.append(row)
    beq.append(float(len(sizes)))
    for j in range(T):
        row = np.zeros(L.n)
        row[[L.zeta(i, j) for i in range(T)]] = 1.0
        for k, p in enumerate(unique):
            row[L.omega(j, k)] = -float(p)
        eq.append(row)
        beq.append(0.0)
    for j in range(T):
        # a median is open exactly when it carries one size
        row = np.zeros(L.n)
        row[[L.omega(j, k) for k in range(L.K)]] = 1.0
        row[L.zeta(j, j)] = -1.0
        eq.append(row)
        beq.append(0.0)
    for k, count in enumerate(counts):
        row = np.zeros(L.n)
        row[[L.omega(j, k) for j in range(T)]] = 1.0
        eq.append(row)
        beq.append(float(count))

    ub, bub = [], []
    for j in range(T):
        for i in range(T):
            if i != j:
                row = np.zeros(L.n)
                row[L.zeta(i, j)] = 1.0
                row[L.zeta(j, j)] = -1.0
                ub.append(row)
                bub.append(0.0)
    return (
        c, sparse.csr_array(np.array(eq)), np.array(beq),
        sparse.csr_array(np.array(ub)), np.array(bub), L,
    )


def _encode(groups, medians, layout: PMedianLayout) -> np.ndarray:
    x = np.zeros(layout.n)
    for group, j in zip(groups, medians):
        for i in group:
            x[layout.zeta(i, j)] = 1.0
        x[layout.omega(j, layout.unique_sizes.index(len(group)))] = 1.0
    return x


def _median(group, D) -> int:
    return min(group, key=lambda j: (float(sum(D[i, j] for i in group)), j))


def contiguous_incumbent(distances, sizes, layout: PMedianLayout) -> np.ndarray | None:
    """A feasible start for branch-and-bound: contiguous blocks along the first row's order.

    For distances that are gaps between scalar norms this is often optimal,
    which lets the search prune from the first node. It is only an initial
    upper bound; optimality is still proven by the tree.
    """
    D = np.asarray(distances, dtype=float)
    T = D.shape[0]
    if len(set(itertools.permutations(sizes))) > 5040:
        return None
    # the object farthest from object 0 is an end of the line when D comes from norms
    anchor = int(np.argmax(D[0]))
    order = sorted(range(T), key=lambda i: (D[anchor, i], i))
    best, best_cost = None, np.inf
    for perm in sorted(set(itertools.permutations(sizes))):
        groups, pos = [], 0
        for p in perm:
            groups.append(order[pos : pos + p])
            pos += p
        medians = [_median(g, D) for g in groups]
        cost = sum(float(sum(D[i, j] for i in g)) for g, j in zip(groups, medians))
        if cost < best_cost - 1e-12:
            best, best_cost = (groups, medians), cost
    return _encode(*best, layout)


def line_pmedian(points, sizes) -> tuple[tuple[int, ...], ...]:
    """Exact p-median with fixed category sizes for objects on a line, d(i, j) = |x_i - x_j|.

    Some optimal solution is made of contiguous runs in sorted order. Given
    any solution's medians, sending the sorted objects to the sorted medians
    in order is an optimal transport for the convex cost |x - m|, and each run
    then does at least as well around its own median, which is a member. So
    a dynamic program over (position, sizes still to place) is exact.
    """
    x = np.asarray(points, dtype=float)
    order = sorted(range(x.size), key=lambda i: (x[i], i))
    xs = x[order]
    prefix = np.concatenate([[0.0], np.cumsum(xs)])
    unique = tuple(sorted(set(sizes)))

    def run_cost(a, b):
        m = (a + b - 1) // 2  # lower median of xs[a:b]
        left = xs[m] * (m - a) - (prefix[m] - prefix[a])
        right = (prefix[b] - prefix[m + 1]) - xs[m] * (b - m - 1)
        return float(left + right)

    @functools.lru_cache(maxsize=None)
    def best(pos, remaining):
        if pos == x.size:
            return 0.0, ()
        choice = (math.inf, ())
        for k, p in enumerate(unique):
            if remaining[k] == 0:
                continue
            rest = remaining[:k] + (remaining[k] - 1,) + remaining[k + 1:]
            tail_cost, tail = best(pos + p, rest)
            cost = run_cost(pos, pos + p) + tail_cost
            if cost < choice[0] - 1e-12:
                choice = (cost, (p,) + tail)
        return choice

    _, runs = best(0, tuple(list(sizes).count(p) for p in unique))
    cats, pos = [], 0
    for p in runs:
        cats.append(tuple(sorted(order[pos : pos + p])))
        pos += p
    return tuple(sorted(cats))


def solve_cardinality_pmedian(distances, sizes, points=None) -> tuple[tuple[int, ...], ...]:
    """Optimal partition of the objects into categories of the given sizes.

    With ``points`` (coordinates on a line that generate ``distances``) the
    exact :func:`line_pmedian` is used; otherwise the binary program goes to
    branch-and-bound. Categories come back ordered by smallest member.
    """
    D = np.asarray(distances, dtype=float)
    T = D.shape[0]
    sizes = tuple(sizes)
    if sum(sizes) != T or any(p < 1 for p in sizes):
        raise InfeasibleSizes(f"sizes {sizes} do not partition {T} objects")
    if points is not None:
        if not np.allclose(distances_from_norms(points), D, rtol=0.0, atol=1e-12):
            raise ValueError("points do not generate the distance matrix")
        return line_pmedian(points, sizes)
    c, A_eq, b_eq, A_ub, b_ub, L = pmedian_program(D, sizes)
    start = contiguous_incumbent(D, sizes, L)
    out = solve_binary_program(c, A_eq, b_eq, A_ub, b_ub, incumbent=start)
    if out.status != OPTIMAL:
        raise SolverFailure(f"p-median for sizes {sizes} reported {out.status}", out.status)
    x = out.solution
    cats = []
    for j in range(T):
        if x[L.zeta(j, j)] > 0.5:
            cats.append(tuple(i for i in range(T) if x[L.zeta(i, j)] > 0.5))
    return tuple(sorted(cats))


@dataclass(frozen=True)
class SeedCandidate:
    sizes: tuple[int, ...]
    classification: Classification


def _pmedian_task(args):
    distances, sizes, points = args
    return solve_cardinality_pmedian(distances, sizes, points)


def order_by_norm(categories, norms) -> tuple:
    """Categories sorted by mean member norm, so index 0 is the most efficient tier."""
    return tuple(
        sorted(categories, key=lambda c: (float(np.mean([norms[t] for t in c])), min(c)))
    )


def seed_candidates(
    table: CharacteristicTable,
    S: int,
    spec: UncertaintySpec | None = None,
    settings: ProximitySettings = DEFAULT_SETTINGS,
    pool=None,
    book: ProximityBook | None = None,
    norms=None,
) -> list[SeedCandidate]:
    """One scored p-median partition per size multiset, in canonical multiset order."""
    multisets = enumerate_size_multisets(table.T, S)
    if norms is None:
        norms = object_norms(table, spec, settings, pool)
    D = distances_from_norms(norms)
    tasks = [(D, sizes, norms) for sizes in multisets]
    parts = pool.map(_pmedian_task, tasks) if pool else [_pmedian_task(a) for a in tasks]
    book = book or ProximityBook(table, spec, settings, pool)
    book.fill([c for cats in parts for c in cats])
    return [
        SeedCandidate(sizes, book.score(Classification(order_by_norm(cats, norms))))
        for sizes, cats in zip(multisets, parts)
    ]


def seed_classification(
    table: CharacteristicTable,
    S: int,
    spec: UncertaintySpec | None = None,
    settings: ProximitySettings = DEFAULT_SETTINGS,
    pool=None,
    book: ProximityBook | None = None,
) -> Classification:
    """The candidate with the smallest total proximity; ties go to the earlier multiset."""
    candidates = seed_candidates(table, S, spec, settings, pool, book)
    best = candidates[0]
    for cand in candidates[1:]:
        if cand.classification.total < best.classification.total:
            best = cand
    return best.classification
