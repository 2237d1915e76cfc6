"""Order-preserving parallel map capped by the HFD_THREADS environment variable."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    try:
        n = int(os.environ.get("HFD_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def pmap(fn, items):
    items = list(items)
    n = thread_count()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
