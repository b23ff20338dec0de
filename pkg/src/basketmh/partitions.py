"""Set partitions of baskets, enumerated in canonical order.

A canonical partition is a restricted growth string: ``a[0] == 1`` and each
``a[i] <= 1 + max(a[:i])``. Listing those strings lexicographically gives
every set partition exactly once, with the single-class model first.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Iterator

from .core_types import Partition


@lru_cache(maxsize=None)
def bell(k: int) -> int:
    """Number of set partitions of ``k`` items (Bell triangle)."""
    if k < 0:
        raise ValueError("k must be non-negative")
    row = [1]
    for _ in range(k):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


def stirling2(k: int, m: int) -> int:
    """Partitions of ``k`` items into exactly ``m`` non-empty blocks."""
    if k == m:
        return 1
    if m == 0 or m > k:
        return 0
    table = [[0] * (m + 1) for _ in range(k + 1)]
    table[0][0] = 1
    for i in range(1, k + 1):
        for j in range(1, min(i, m) + 1):
            table[i][j] = j * table[i - 1][j] + table[i - 1][j - 1]
    return table[k][m]


def set_partitions(k: int, max_blocks: int | None = None) -> Iterator[Partition]:
    """All partitions of ``k`` items, optionally capped at ``max_blocks`` subclasses."""
    if k < 1:
        raise ValueError("need at least one item")
    cap = k if max_blocks is None else max_blocks
    a = [1] * k

    def rec(i: int, top: int):
        if i == k:
            yield Partition(tuple(a))
            return
        for v in range(1, min(top + 1, cap) + 1):
            a[i] = v
            yield from rec(i + 1, max(top, v))

    yield from rec(1, 1)
