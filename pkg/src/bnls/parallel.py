import os
from concurrent.futures import ThreadPoolExecutor

WORKERS_ENV = "BNLS_WORKERS"


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def pmap(fn, items):
    """Map ``fn`` over ``items`` on a bounded thread pool; order is preserved."""
    items = list(items)
    n = worker_count()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
