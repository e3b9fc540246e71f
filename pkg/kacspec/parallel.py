import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from kacspec import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def thread_map(func: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """Ordered map over a thread pool; numpy releases the GIL in the heavy parts."""
    items = list(items)
    workers = settings.KACSPEC_THREADS if threads is None else int(threads)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    logger.debug("Mapping %d items on %d threads", len(items), workers)
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items))
