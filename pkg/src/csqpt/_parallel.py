import os
from concurrent.futures import ThreadPoolExecutor


def thread_count():
    """Parallelism cap from ``CSQPT_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("CSQPT_THREADS", "1")))
    except ValueError:
        return 1


def pmap(fn, items):
    items = list(items)
    n = thread_count()
    if n == 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
