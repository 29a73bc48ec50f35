"""Deterministic task fan-out.

Tasks always run with single-threaded BLAS so that results do not depend on
``jobs``; large read-only arrays reach forked workers through ``shared``
instead of being pickled per task.
"""
from __future__ import annotations

import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

from threadpoolctl import threadpool_limits

T = TypeVar("T")
R = TypeVar("R")

_SHARED: dict = {}
_LIMITER = None


def shared() -> dict:
    return _SHARED


def _init_worker(payload: dict) -> None:
    global _LIMITER
    _SHARED.clear()
    _SHARED.update(payload)
    _LIMITER = threadpool_limits(1)


def map_tasks(fn: Callable[[T], R], tasks: Iterable[T], jobs: int = 1, payload: dict | None = None) -> list[R]:
    """Apply ``fn`` to every task; results come back in task order."""
    tasks = list(tasks)
    payload = payload or {}
    if jobs <= 1 or len(tasks) <= 1:
        saved = dict(_SHARED)
        _SHARED.update(payload)
        try:
            with threadpool_limits(1):
                return [fn(t) for t in tasks]
        finally:
            _SHARED.clear()
            _SHARED.update(saved)
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx,
                             initializer=_init_worker, initargs=(payload,)) as pool:
        return list(pool.map(fn, tasks))
