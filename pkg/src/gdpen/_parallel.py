"""Order-preserving parallel map over independent tasks."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def worker_count(requested=None):
    """Number of worker processes: ``requested``, else GDPEN_THREADS, else the CPU count."""
    if requested is None:
        env = os.environ.get("GDPEN_THREADS")
        requested = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(requested))


def map_ordered(fn, tasks, workers=None, chunksize=None):
    """[fn(t) for t in tasks], possibly computed in worker processes.

    Results come back in task order, so anything accumulated from them does
    not depend on scheduling or on the number of workers.
    """
    tasks = list(tasks)
    n = min(worker_count(workers), len(tasks))
    if n <= 1:
        return [fn(t) for t in tasks]
    if chunksize is None:
        chunksize = max(1, len(tasks) // (4 * n))
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, tasks, chunksize=chunksize))
