"""Pure-Python posting-list kernels.

Posting lists are ``array('q')`` of strictly ascending instance ids.
Semantics are identical to the compiled versions in ``_kernels.pyx``.
"""

from __future__ import annotations

import heapq
from array import array
from bisect import bisect_left
from typing import Sequence

IMPLEMENTATION = "python"

# Below this size ratio a per-element binary search beats hashing the larger side.
_GALLOP_RATIO = 16


def intersect_sorted(a: Sequence[int], b: Sequence[int]) -> array:
    if len(a) > len(b):
        a, b = b, a
    if not a:
        return array("q")
    if len(a) * _GALLOP_RATIO < len(b):
        out = array("q")
        lo, n = 0, len(b)
        for x in a:
            lo = bisect_left(b, x, lo, n)
            if lo == n:
                break
            if b[lo] == x:
                out.append(x)
        return out
    sb = set(b)
    return array("q", [x for x in a if x in sb])


def merge_disjoint(lists: Sequence[Sequence[int]]) -> array:
    """Merge ascending, pairwise-disjoint lists into one ascending list."""
    if not lists:
        return array("q")
    if len(lists) == 1:
        return array("q", lists[0])
    return array("q", heapq.merge(*lists))


def fold_deltas(present: set, ops: Sequence[int], ids: Sequence[int], start: int, stop: int) -> int:
    """Apply deltas ``[start, stop)`` to ``present`` in place; op 1 adds, 0 removes."""
    for i in range(start, stop):
        if ops[i]:
            present.add(ids[i])
        else:
            present.discard(ids[i])
    return max(0, stop - start)
