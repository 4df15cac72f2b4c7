"""
Order-preserving thread pool map.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def default_threads() -> int:
    return os.cpu_count() or 1


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """
    Apply fn to every item, returning results in input order.

    Args:
        fn: Pure function of one item
        items: Work items
        threads: Worker cap; None uses every core, 1 runs inline

    Returns:
        List of results aligned with items
    """
    work = list(items)
    workers = min(threads or default_threads(), len(work))
    if workers <= 1:
        return [fn(item) for item in work]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, work))
