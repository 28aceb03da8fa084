"""Replica seeding and a thread pool for the compiled kernels (they release the GIL)."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def replica_seeds(seed: int, n: int) -> list[int]:
    """Independent 64-bit seeds for ``n`` replicas, spawned from ``seed``."""
    children = np.random.SeedSequence(int(seed)).spawn(n)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def default_jobs() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def map_replicas(fn, items, jobs: int | None = None) -> list:
    """``[fn(x) for x in items]``, spread over ``jobs`` threads; order kept."""
    items = list(items)
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    if jobs == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))
