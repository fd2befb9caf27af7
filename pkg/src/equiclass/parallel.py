"""Process pool for the independent evaluations (categories, objects, size multisets).

Results always come back in submission order, so reports do not depend on
the number of workers.
"""

from __future__ import annotations

from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from functools import partial

from equiclass import solver


def _counted(fn, item):
    before = Counter(solver.STATS)
    out = fn(item)
    delta = Counter(solver.STATS)
    delta.subtract(before)
    return out, +delta


class WorkerPool:
    """``map`` over a process pool, or inline when ``workers == 1``."""

    def __init__(self, workers: int = 1):
        if workers < 1:
            raise ValueError("workers must be positive")
        self.workers = workers
        self._executor = None

    def __enter__(self):
        if self.workers > 1:
            self._executor = ProcessPoolExecutor(max_workers=self.workers)
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None

    def map(self, fn, items) -> list:
        items = list(items)
        if self._executor is None or len(items) <= 1:
            return [fn(item) for item in items]
        chunk = max(1, len(items) // (4 * self.workers))
        results = []
        for out, delta in self._executor.map(partial(_counted, fn), items, chunksize=chunk):
            solver.STATS.update(delta)
            results.append(out)
        return results
