"""Deterministic thread-pool map capped by ``SLITLAB_THREADS``."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["workers", "pmap"]


def workers() -> int:
    raw = os.environ.get("SLITLAB_THREADS", "")
    try:
        n = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        n = 1
    return max(1, n)


def pmap(fn, items):
    """``list(map(fn, items))`` on a thread pool; results keep input order."""
    items = list(items)
    w = min(workers(), len(items))
    if w <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=w) as ex:
        return list(ex.map(fn, items))
