"""Small shared helpers: deterministic parallel mapping, tolerance logic."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

#: Below this magnitude, relative error is meaningless; comparisons switch
#: to the absolute scale rel_tol * MAGNITUDE_FLOOR.
MAGNITUDE_FLOOR = 1e-4


def default_threads() -> int:
    env = os.environ.get("FINSLER_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """Order-preserving map; identical output for any thread count."""
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def rel_delta(a: float, b: float) -> float:
    """|a - b| normalized by max(|a|, |b|, MAGNITUDE_FLOOR).

    With rel tolerance 1e-6 this reproduces the 1e-10 absolute floor for
    near-zero quantities.
    """
    return abs(a - b) / max(abs(a), abs(b), MAGNITUDE_FLOOR)


def max_rel_delta(a: Sequence[float], b: Sequence[float]) -> float:
    return max(rel_delta(x, y) for x, y in zip(a, b))
