import os
from concurrent.futures import ThreadPoolExecutor


def max_workers():
    """Thread cap from ``CONEREG_THREADS`` (default 1, i.e. serial)."""
    raw = os.environ.get("CONEREG_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def pmap(func, items):
    """Ordered map; results never depend on scheduling."""
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
