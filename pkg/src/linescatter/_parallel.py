from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np


def chunked_map(fn, arr, n_jobs: int | None = 1):
    """Apply a vectorised ``fn`` to contiguous chunks of ``arr`` on a thread pool.

    Results are concatenated in input order, so the output does not depend
    on the number of workers.  ``fn`` may return an array or a tuple of
    arrays.
    """
    arr = np.asarray(arr)
    n_jobs = 1 if not n_jobs or n_jobs < 1 else int(n_jobs)
    if n_jobs == 1 or arr.size < 2 * n_jobs:
        return fn(arr)
    chunks = np.array_split(arr, n_jobs)
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        parts = list(pool.map(fn, chunks))
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate(p) for p in zip(*parts))
    return np.concatenate(parts)
