"""
Thread-level parallelism for pair and pixel loops
Single Responsibility: Owns the process-wide thread count and deterministic row blocking
"""

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")

# Block size never depends on the thread count, so per-block results and
# their in-order reduction are identical for any number of threads.
ROW_BLOCK = 64

_num_threads = 1
_worker = threading.local()


def set_num_threads(n: int):
    """Set the number of worker threads used by row-blocked loops"""
    global _num_threads
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _num_threads = int(n)
    logger.debug(f"Thread count set to {_num_threads}")


def get_num_threads() -> int:
    """Current worker thread count"""
    return _num_threads


def row_blocks(n_rows: int, block: int = ROW_BLOCK) -> List[slice]:
    """Fixed-size row slices covering range(n_rows)"""
    return [slice(start, min(start + block, n_rows)) for start in range(0, n_rows, block)]


def _in_worker(fn: Callable[[slice], T]) -> Callable[[slice], T]:
    def run(rows: slice) -> T:
        _worker.active = True
        try:
            return fn(rows)
        finally:
            _worker.active = False
    return run


def map_row_blocks(fn: Callable[[slice], T], n_rows: int, block: int = ROW_BLOCK) -> List[T]:
    """
    Apply fn to every row block and return results in block order.

    Calls made from inside a worker run serially, so nested row-blocked loops
    share the outer pool instead of starting their own.
    """
    blocks = row_blocks(n_rows, block)
    if _num_threads == 1 or len(blocks) <= 1 or getattr(_worker, "active", False):
        return [fn(rows) for rows in blocks]
    with ThreadPoolExecutor(max_workers=_num_threads) as pool:
        return list(pool.map(_in_worker(fn), blocks))
