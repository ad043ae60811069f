"""Ordered fan-out of independent computations across worker processes."""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor

_LOGGER = logging.getLogger(__name__)


def ordered_map[T, R](func: Callable[[T], R], items: Iterable[T], jobs: int = 1) -> list[R]:
    """Apply ``func`` to every item, results in input order.

    ``jobs <= 1`` runs in-process; otherwise a process pool of ``jobs``
    workers is used. ``func`` and the items must be picklable then.
    """
    work = list(items)
    if jobs <= 1 or len(work) <= 1:
        return [func(item) for item in work]
    workers = min(jobs, len(work))
    _LOGGER.debug("Dispatching %d tasks to %d workers", len(work), workers)
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, work))
