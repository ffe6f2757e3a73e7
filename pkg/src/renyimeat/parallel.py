"""Thread helpers for restart batches.

Entropy optimizers below run multi-start searches whose iterations are
dominated by dense eigendecompositions, which release the GIL; the
``RENYI_MEAT_THREADS`` environment variable sets the pool size for those
batches.  Unset (or 1) keeps everything sequential.  Results preserve input
order, and every restart carries its own pre-assigned seed, so values are
identical regardless of the thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    raw = os.environ.get("RENYI_MEAT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        n = 1
    return max(1, n)


def run_batch(fn, items):
    """Map ``fn`` over ``items``, in a thread pool when configured."""
    items = list(items)
    n = thread_count()
    if n <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))
