"""Deterministic per-agent parallelism.

Within a round the per-agent updates are independent, so they may run on
a thread pool.  Every worker writes into a preassigned slot of a shared
array and all reductions happen afterwards in fixed agent order, which
makes the computed numbers bitwise independent of the worker count.

``CCLAB_THREADS`` caps the pool size: unset or ``1`` runs serially,
``0`` uses one worker per CPU.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager


def worker_count() -> int:
    raw = os.environ.get("CCLAB_THREADS", "").strip()
    if not raw:
        return 1
    count = int(raw)
    if count < 0:
        raise ValueError("CCLAB_THREADS must be >= 0")
    if count == 0:
        return os.cpu_count() or 1
    return count


@contextmanager
def agent_pool():
    """Yield a ThreadPoolExecutor per the environment cap, or None for serial runs."""
    workers = worker_count()
    if workers <= 1:
        yield None
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        yield pool


def run_per_agent(pool, fn, m: int) -> None:
    """Invoke ``fn(i)`` for every agent index, possibly on the pool."""
    if pool is None or m == 1:
        for i in range(m):
            fn(i)
    else:
        list(pool.map(fn, range(m)))
