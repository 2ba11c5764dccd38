from concurrent.futures import ThreadPoolExecutor

from ._validation import resolve_threads


def pmap(fn, items, threads=None):
    """Order-preserving map over a thread pool; serial when threads == 1."""
    items = list(items)
    n = resolve_threads(threads)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
