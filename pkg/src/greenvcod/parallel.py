from concurrent.futures import ThreadPoolExecutor


def pmap(fn, items, workers=1):
    """Order-preserving map; results never depend on ``workers``."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
