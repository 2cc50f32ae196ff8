"""Ordered parallel map capped by ``HYPSLAB_THREADS``.

Tasks are independent and results come back in submission order, so the
output never depends on the worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

from hypslab.hgeom import ConfigurationError

__all__ = ["thread_count", "ordered_map"]


def thread_count() -> int:
    raw = os.environ.get("HYPSLAB_THREADS", "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"HYPSLAB_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigurationError(f"HYPSLAB_THREADS must be a positive integer, got {raw!r}")
    return n


def ordered_map(fn, items) -> list:
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
