"""Bounded, order-preserving fan-out over a stream."""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Iterator, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1, chunk: int = 64) -> Iterator[R]:
    """Like ``map`` but across ``threads`` workers; results come back in input order.

    Input is consumed ``threads * chunk`` items at a time, so memory stays
    bounded on long streams.
    """
    if threads <= 1:
        yield from map(fn, items)
        return
    it = iter(items)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        while True:
            batch = list(itertools.islice(it, threads * chunk))
            if not batch:
                return
            yield from pool.map(fn, batch)
