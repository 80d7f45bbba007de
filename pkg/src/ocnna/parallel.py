"""Order-preserving parallel map."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def default_workers() -> int:
    return os.cpu_count() or 1


def indexed_map(fn, items, workers: int = 1) -> list:
    """Apply ``fn`` to every item; result ``i`` always lands in slot ``i``.

    Tasks run on a thread pool (numpy releases the GIL in its kernels).
    Completion order never affects the output.
    """
    items = list(items)
    if workers < 1:
        raise ValueError(f"workers must be positive, got {workers}")
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    results = [None] * len(items)
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        futures = {pool.submit(fn, item): i for i, item in enumerate(items)}
        for fut, i in futures.items():
            results[i] = fut.result()
    return results
