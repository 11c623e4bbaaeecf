"""Enumeration of data trees up to size, one per equivalence class."""
from __future__ import annotations

from functools import lru_cache
from typing import Iterable, Iterator, Optional

from .trees import DataTree, canonical_key

_DATA = None  # placeholder for a data leaf in shapes


def _shapes(alphabet: tuple, n: int, depth: int) -> list:
    """Unordered shapes of exactly ``n`` nodes as nested tuples."""

    @lru_cache(maxsize=None)
    def trees(n, d):
        out = []
        if n == 1:
            out.append(_DATA)
        if d >= 1 or n == 1:
            for a in alphabet:
                for f in forests(n - 1, d - 1):
                    out.append((a, f))
        return tuple(out)

    @lru_cache(maxsize=None)
    def forests(n, d):
        # multisets of trees, listed in nondecreasing (size, index) order
        if n == 0:
            return ((),)
        if d < 0:
            return ()
        out = []

        def rec(remaining, min_size, min_idx, acc):
            if remaining == 0:
                out.append(tuple(acc))
                return
            for size in range(min_size, remaining + 1):
                cands = trees(size, d)
                start = min_idx if size == min_size else 0
                for i in range(start, len(cands)):
                    acc.append(cands[i])
                    rec(remaining - size, size, i, acc)
                    acc.pop()

        rec(n, 1, 0, [])
        return tuple(out)

    return list(trees(n, depth))


def _restricted_growth(m: int) -> Iterator[list[int]]:
    """Set partitions of ``m`` positions as restricted growth strings."""
    if m == 0:
        yield []
        return
    seq = [0] * m

    def rec(i, top):
        if i == m:
            yield list(seq)
            return
        for v in range(top + 2):
            seq[i] = v
            yield from rec(i + 1, max(top, v))

    yield from rec(1, 0)


def _instantiate(shape, values: list[int]) -> DataTree:
    it = iter(values)

    def rec(s):
        if s is _DATA:
            return next(it)
        return (s[0], [rec(c) for c in s[1]])

    return DataTree.from_nested(rec(shape))


def _count_data(shape) -> int:
    if shape is _DATA:
        return 1
    return sum(_count_data(c) for c in shape[1])


def enumerate_trees(
    alphabet: Iterable[str],
    max_size: int,
    max_depth: Optional[int] = None,
    root_labels: Optional[Iterable[str]] = None,
    min_size: int = 1,
) -> Iterator[DataTree]:
    """All trees with tag roots up to ``max_size`` nodes, up to data renaming.

    Data values are drawn from ``0..m-1`` for ``m`` data leaves.
    """
    alphabet = tuple(sorted(alphabet))
    depth = max_size if max_depth is None else max_depth
    roots = None if root_labels is None else set(root_labels)
    for n in range(max(1, min_size), max_size + 1):
        for shape in _shapes(alphabet, n, depth):
            if shape is _DATA or (roots is not None and shape[0] not in roots):
                continue
            m = _count_data(shape)
            seen = set()
            for rgs in _restricted_growth(m):
                t = _instantiate(shape, rgs)
                if m > 1:
                    k = canonical_key(t)
                    if k in seen:
                        continue
                    seen.add(k)
                yield t
