"""Deterministic parallel mapping.

Work items must be pure functions; results are merged in submission order,
so the output is independent of the worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def parallel_map(fn, items, degree: int = 1) -> list:
    items = list(items)
    if degree <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=degree) as pool:
        return list(pool.map(fn, items))
