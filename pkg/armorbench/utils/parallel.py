"""Per-sample thread pool with deterministic result order."""

from concurrent.futures import ThreadPoolExecutor


def map_ordered(fn, items, threads=1):
    """Apply fn to every item; results come back in input order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
