"""Best-improvement neighbourhood search over single-object moves."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

from equiclass.errors import EquiclassError
from equiclass.model import CharacteristicTable, Classification, UncertaintySpec
from equiclass.proximity import DEFAULT_SETTINGS, ProximityBook, ProximitySettings
from equiclass.seeding import object_norms, seed_candidates

log = logging.getLogger(__name__)

IMPROVEMENT_TOL = 1e-9


@dataclass(frozen=True)
class Move:
    obj: int
    source: int
    dest: int
    classification: Classification


def neighbors(classification: Classification) -> list[Move]:
    """Every single-object move that leaves its source category nonempty.

    Ordered by moved object, then destination index, which is also the
    tie-breaking order of :func:`improve`.
    """
    cats = classification.categories
    moves = []
    for t in sorted(k for c in cats for k in c):
        s = classification.category_of(t)
        if len(cats[s]) == 1:
            continue
        for dest in range(len(cats)):
            if dest != s:
                moves.append(Move(t, s, dest, classification.moved(t, s, dest)))
    return moves


def improve(
    table: CharacteristicTable,
    classification: Classification,
    spec: UncertaintySpec | None = None,
    book: ProximityBook | None = None,
    settings: ProximitySettings = DEFAULT_SETTINGS,
) -> tuple[Classification, bool]:
    """Best neighbour if it lowers the total by more than 1e-9, else the incumbent."""
    book = book or ProximityBook(table, spec, settings)
    incumbent = classification if classification.total is not None else book.score(classification)
    moves = neighbors(incumbent)
    # only the two categories touched by a move are new; the rest are cached
    book.fill([m.classification.categories[k] for m in moves for k in (m.source, m.dest)])
    best = None
    for move in moves:
        scored = book.score(move.classification)
        if best is None or scored.total < best.total:
            best = scored
    if best is not None and best.total < incumbent.total - IMPROVEMENT_TOL:
        return best, True
    return incumbent, False


@dataclass(frozen=True, eq=False)
class SearchRun:
    """Everything a classification run produced, in the order it was produced."""

    norms: object
    candidates: list
    seed_sizes: tuple
    history: list
    phases: dict

    @property
    def final(self) -> Classification:
        return self.history[-1]


def run_search(
    table: CharacteristicTable,
    S: int,
    spec: UncertaintySpec | None = None,
    settings: ProximitySettings = DEFAULT_SETTINGS,
    pool=None,
    book: ProximityBook | None = None,
) -> SearchRun:
    spec = spec or UncertaintySpec.identity()
    if not spec.searchable:
        raise EquiclassError("explicit uncertainty matrices are tied to fixed categories")
    book = book or ProximityBook(table, spec, settings, pool)
    phases = {}
    tick = time.perf_counter()
    norms = object_norms(table, spec, settings, pool)
    phases["object_norms"] = time.perf_counter() - tick
    log.info("object norms done for %d objects", table.T)

    tick = time.perf_counter()
    candidates = seed_candidates(table, S, spec, settings, pool, book, norms)
    best = candidates[0]
    for cand in candidates[1:]:
        if cand.classification.total < best.classification.total:
            best = cand
    phases["seeding"] = time.perf_counter() - tick
    log.info("seed total %.6f from sizes %s", best.classification.total, best.sizes)

    tick = time.perf_counter()
    history = [best.classification]
    while True:
        current, improved = improve(table, history[-1], spec, book, settings)
        if not improved:
            break
        history.append(current)
        log.info("step %d total %.6f", len(history) - 1, current.total)
    phases["search"] = time.perf_counter() - tick
    return SearchRun(norms, candidates, best.sizes, history, phases)


def classify(
    table: CharacteristicTable,
    S: int,
    spec: UncertaintySpec | None = None,
    settings: ProximitySettings = DEFAULT_SETTINGS,
    pool=None,
    book: ProximityBook | None = None,
) -> tuple[Classification, list[Classification]]:
    """Seed with the best p-median classification, then improve until no move helps."""
    result = run_search(table, S, spec, settings, pool, book)
    return result.final, result.history
