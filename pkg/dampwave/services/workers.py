"""Thread-pool fan-out with order-preserving results."""
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, Iterable, TypeVar

log = logging.getLogger("dampwave.workers")

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """Apply `fn` to every item; results come back in input order.

    The first exception raised by a worker is re-raised once all submitted
    work has been collected.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    results: list = [None] * len(items)
    first_error = None
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {pool.submit(fn, item): idx for idx, item in enumerate(items)}
        for fut in as_completed(futures):
            idx = futures[fut]
            try:
                results[idx] = fut.result()
            except Exception as e:
                log.debug(f"worker {idx} failed: {e}")
                if first_error is None:
                    first_error = e
    if first_error is not None:
        raise first_error
    return results
