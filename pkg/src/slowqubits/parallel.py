"""Ordered process-pool map used by sweeps and cycle sampling."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

WORKERS_ENV = "SLOWQUBITS_WORKERS"


def resolve_workers(workers: int | None = None) -> int:
    """Explicit value, else $SLOWQUBITS_WORKERS, else 1."""
    if workers is None:
        raw = os.environ.get(WORKERS_ENV, "").strip()
        if not raw:
            return 1
        try:
            workers = int(raw)
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if workers < 1:
        raise ValueError(f"worker count must be at least 1, got {workers}")
    return workers


def ordered_map(fn, items, workers: int | None = None, chunks_per_worker: int = 4) -> list:
    """``[fn(x) for x in items]``, optionally across processes.

    Results always come back in input order, so reductions over them are
    independent of the worker count.
    """
    items = list(items)
    n = resolve_workers(workers)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (n * chunks_per_worker))
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items, chunksize=chunk))
