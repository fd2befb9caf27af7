"""Proximity to equitable efficiency of one category.

The proximity is the smallest ||sigma|| making every member robustly
efficient. It is bracketed by the componentwise maximum ``sigma_hat`` of the
members' individual minimal sigmas (upper bound ||sigma_hat||, lower bound
||sigma_hat|| / sqrt(M + N)) and estimated by first-order descent from
``sigma_hat`` on the score sum Gamma(sigma).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from equiclass import descent
from equiclass.dea import EPS_EFF, ScoreCache, efficiency, is_efficient, min_sigma_for_object
from equiclass.model import CharacteristicTable, ProximityResult, UncertaintySpec, sigma_vector

direction_search = descent.direction_search
log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProximitySettings:
    epsilon: float = 1e-4  # aggregated feasibility slack on Gamma
    delta: float = 1e-3  # backward-difference step, scaled by max(1, max sigma)
    eps_eff: float = EPS_EFF
    max_iters: int = 100
    resolution: float = 1e-8  # bisection resolution relative to the step bound

    def __post_init__(self):
        for name in ("epsilon", "delta", "eps_eff", "resolution"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")


DEFAULT_SETTINGS = ProximitySettings()


@dataclass(frozen=True, eq=False)
class GammaEvaluation:
    sigma: np.ndarray
    per_object_scores: np.ndarray
    gamma: float


def _cache(table, category, spec, cache):
    return cache if cache is not None else ScoreCache(table, category, spec)


def gamma(
    table: CharacteristicTable,
    category: Sequence[int],
    sigma,
    spec: UncertaintySpec | None = None,
    cache: ScoreCache | None = None,
) -> GammaEvaluation:
    """Sum of robust efficiencies over the category at ``sigma``."""
    cat = sorted(category)
    sigma = sigma_vector(sigma, table.rows)
    score = _cache(table, cat, spec, cache)
    scores = np.array([score(t, sigma) for t in cat])
    return GammaEvaluation(sigma, scores, float(sum(scores)))


def gamma_gradient(
    table: CharacteristicTable,
    category: Sequence[int],
    sigma,
    delta: float,
    spec: UncertaintySpec | None = None,
    cache: ScoreCache | None = None,
) -> np.ndarray:
    cat = sorted(category)
    score = _cache(table, cat, spec, cache)
    return descent.backward_gradient(
        lambda s: gamma(table, cat, s, spec, score).gamma,
        sigma_vector(sigma, table.rows),
        delta,
    )


def line_search(
    table: CharacteristicTable,
    category: Sequence[int],
    sigma,
    d,
    sigma_hat_norm: float,
    epsilon: float = DEFAULT_SETTINGS.epsilon,
    spec: UncertaintySpec | None = None,
    resolution: float = DEFAULT_SETTINGS.resolution,
    cache: ScoreCache | None = None,
) -> float:
    """Largest admissible step along ``d`` keeping Gamma >= |C| - epsilon."""
    cat = sorted(category)
    sigma = sigma_vector(sigma, table.rows)
    d = np.asarray(d, dtype=float)
    score = _cache(table, cat, spec, cache)
    floor_sq = sigma_hat_norm**2 / table.rows
    alpha_max = descent.step_bound(sigma, d, floor_sq)
    target = len(cat) - epsilon

    def feasible(alpha):
        point = np.maximum(sigma + alpha * d, 0.0)
        return gamma(table, cat, point, spec, score).gamma >= target

    return descent.bisect_step(feasible, alpha_max, resolution)


def member_sigmas(
    table: CharacteristicTable,
    category: Sequence[int],
    spec: UncertaintySpec | None = None,
    settings: ProximitySettings = DEFAULT_SETTINGS,
    cache: ScoreCache | None = None,
) -> dict[int, np.ndarray]:
    cat = sorted(category)
    score = _cache(table, cat, spec, cache)
    return {
        t: min_sigma_for_object(
            table, cat, t, spec, settings.eps_eff, settings.delta, settings.max_iters, score
        )
        for t in cat
    }


def sigma_hat(
    table: CharacteristicTable,
    category: Sequence[int],
    spec: UncertaintySpec | None = None,
    settings: ProximitySettings = DEFAULT_SETTINGS,
    cache: ScoreCache | None = None,
) -> np.ndarray:
    """Componentwise maximum of the members' minimal sigmas (zero for |C| <= 2)."""
    if len(category) <= 2:
        return np.zeros(table.rows)
    sigmas = member_sigmas(table, category, spec, settings, cache)
    return np.max(np.vstack(list(sigmas.values())), axis=0)


def _pair_flags(table, category) -> tuple:
    if len(category) != 2:
        return ()
    if all(is_efficient(efficiency(table, category, t)) for t in category):
        return ()
    return ("pair_with_inefficient_member",)


def proximity(
    table: CharacteristicTable,
    category: Sequence[int],
    spec: UncertaintySpec | None = None,
    settings: ProximitySettings = DEFAULT_SETTINGS,
) -> ProximityResult:
    cat = tuple(sorted(category))
    if not cat:
        raise ValueError("category must be nonempty")
    rows = table.rows
    zeros = np.zeros(rows)
    if len(cat) <= 2:
        return ProximityResult(cat, zeros, 0.0, 0.0, 0.0, zeros, flags=_pair_flags(table, cat))

    score = ScoreCache(table, cat, spec)
    sigmas = member_sigmas(table, cat, spec, settings, score)
    hat = np.max(np.vstack(list(sigmas.values())), axis=0)
    upper = float(np.linalg.norm(hat))
    lower = upper / math.sqrt(rows)
    single = any(np.all(np.abs(hat - s) <= 1e-9) for s in sigmas.values())
    if single:
        return ProximityResult(
            cat, hat, lower, upper, upper, hat.copy(), True, ((upper, float(len(cat))),),
            "single_object",
        )

    res = descent.descend(
        lambda s: gamma(table, cat, s, spec, score).gamma,
        hat,
        threshold=len(cat) - settings.epsilon,
        floor_sq=upper**2 / rows,
        delta=settings.delta,
        max_iters=settings.max_iters,
        resolution=settings.resolution,
    )
    estimate = float(np.linalg.norm(res.sigma))
    return ProximityResult(
        cat, hat, lower, upper, min(estimate, upper), res.sigma, False, res.trace,
        res.exit_reason, res.final_direction_value,
    )


def _proximity_task(args):
    table, category, spec, settings = args
    return proximity(table, category, spec, settings)


class ProximityBook:
    """Proximity results keyed by category, shared by seeding and search.

    Proximity depends only on the category's member set, so a category seen
    under any classification is never solved twice. Missing entries of a
    batch are computed through ``pool`` in submission order.
    """

    def __init__(self, table, spec=None, settings: ProximitySettings = DEFAULT_SETTINGS, pool=None):
        self.table = table
        self.spec = spec
        self.settings = settings
        self.pool = pool
        self.results: dict[tuple, ProximityResult] = {}

    def fill(self, categories) -> None:
        missing = []
        for cat in categories:
            key = tuple(sorted(cat))
            if key not in self.results and key not in missing:
                missing.append(key)
        if not missing:
            return
        tasks = [(self.table, cat, self.spec, self.settings) for cat in missing]
        if self.pool is None:
            outs = [_proximity_task(task) for task in tasks]
        else:
            outs = self.pool.map(_proximity_task, tasks)
        for key, res in zip(missing, outs):
            self.results[key] = res
            log.info(
                "category %s: P = %.6f (%s)", list(key), res.estimate, res.exit_reason
            )

    def __getitem__(self, category) -> ProximityResult:
        key = tuple(sorted(category))
        self.fill([key])
        return self.results[key]

    def score(self, classification):
        """``classification`` with its per-category proximities attached."""
        self.fill(classification.categories)
        return classification.with_proximity(
            [self.results[c].estimate for c in classification.categories]
        )
