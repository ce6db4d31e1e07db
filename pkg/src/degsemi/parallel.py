"""Ordered thread-pool map used by experiment sweeps.

numpy/scipy release the GIL inside LAPACK, so threads give real overlap
for per-level factorizations. Results always come back in input order.
"""

import os
from concurrent.futures import ThreadPoolExecutor

_threads = int(os.environ.get("DEGSEMI_THREADS", "1") or 1)


def set_threads(n):
    global _threads
    _threads = max(1, int(n))


def get_threads():
    return _threads


def parallel_map(fn, items):
    items = list(items)
    if _threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=_threads) as pool:
        return list(pool.map(fn, items))
