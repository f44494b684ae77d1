"""Retrieval over a :class:`~epimem.store.MemoryStore`.

Cue evaluation gathers one posting list per constrained dimension from the
tree set and intersects them smallest-first. Dimensions left as Any are
never touched, which is what makes a partial cue cheap.
"""

from __future__ import annotations

import random
from array import array
from dataclasses import dataclass
from typing import Iterator, Sequence

from . import kernels
from .cue import ANY, Cue, Range
from .episodic_log import Direction
from .errors import ArityError, FeatureError, UnknownInstanceError
from .features import FeatureVector, vector_from_bins
from .occurrence import PresenceInterval
from .store import MemoryStore


@dataclass(frozen=True)
class RecallResult:
    instance_id: int
    intervals: list[PresenceInterval]
    # one (enter, belief at enter) per interval
    beliefs: list[tuple[int, frozenset[int]]]


class QueryEngine:
    def __init__(self, store: MemoryStore) -> None:
        self.store = store
        self.postings_scanned = 0

    def _candidates(self, cue: Cue) -> array:
        schema = self.store.occurrences.schema(cue.class_id)
        cue.validate(schema)
        ts = self.store.occurrences.tree_sets[cue.class_id]
        lists: list[array] = []
        for d in range(schema.ndim):
            b = cue.bounds(d)
            if b is None:
                continue
            leaves = ts.range_leaves(d, b[0], b[1])
            if not leaves:
                return array("q")
            if len(leaves) == 1:
                lists.append(leaves[0].postings)
            else:
                lists.append(kernels.merge_disjoint([lf.postings for lf in leaves]))
        if not lists:
            return ts.members
        lists.sort(key=len)
        acc = lists[0]
        self.postings_scanned += len(acc)
        for other in lists[1:]:
            if not acc:
                break
            self.postings_scanned += len(other)
            acc = kernels.intersect_sorted(acc, other)
        return acc

    def query(self, cue: Cue) -> list[int]:
        """Matching instance ids, ascending."""
        return list(self._candidates(cue))

    def similar(self, class_id: str, vector: FeatureVector, radius: Sequence[int]) -> list[int]:
        schema = self.store.occurrences.schema(class_id)
        if vector.class_id != class_id:
            raise FeatureError(f"vector of {vector.class_id!r} queried as {class_id!r}")
        if len(radius) != schema.ndim or len(vector.bins) != schema.ndim:
            raise ArityError(f"class {class_id!r} expects {schema.ndim} radii")
        if any(r < 0 for r in radius):
            raise ValueError("radii must be non-negative")
        dims = []
        for b, r, spec in zip(vector.bins, radius, schema.dims):
            lo, hi = max(0, b - r), min(spec.bin_count - 1, b + r)
            dims.append(ANY if lo == 0 and hi == spec.bin_count - 1 else Range(lo, hi))
        return self.query(Cue(class_id, tuple(dims)))

    def recall(self, cue: Cue) -> list[RecallResult]:
        return self.recall_ids(self.query(cue))

    def recall_ids(self, ids: Sequence[int]) -> list[RecallResult]:
        out = []
        for iid in ids:
            intervals = self.store.episodes_of(iid)
            beliefs = [(iv.enter, self.store.belief_at(iv.enter)) for iv in intervals]
            out.append(RecallResult(iid, intervals, beliefs))
        return out

    def replay(
        self, instance: int, interval_index: int, direction: Direction = Direction.FORWARD
    ) -> list[tuple[int, frozenset[int]]]:
        """Belief at each delta timestamp in ``[enter, exit)`` of one interval."""
        intervals = self.store.episodes_of(instance)
        if not 0 <= interval_index < len(intervals):
            raise UnknownInstanceError(f"{instance}#{interval_index}")
        iv = intervals[interval_index]
        return list(self._walk(iv.enter, iv.exit, direction))

    def _walk(self, enter: int, exit: int | None, direction: Direction) -> Iterator[tuple[int, frozenset[int]]]:
        log = self.store.log
        if direction is Direction.FORWARD:
            cur: tuple[int, frozenset[int]] | None = (enter, log.belief_at(enter))
            while cur is not None and (exit is None or cur[0] < exit):
                yield cur
                cur = log.step(cur[0], Direction.FORWARD)
            return
        # backward: start at the last delta timestamp before exit
        if exit is None:
            last = log.last_ts
            cur = (last, log.belief_at(last)) if last is not None else None
        else:
            cur = log.step(exit, Direction.BACKWARD)
        while cur is not None and cur[0] >= enter:
            yield cur
            cur = log.step(cur[0], Direction.BACKWARD)

    def imagine_detailed(
        self, class_id: str, noise: Sequence[int], seed: int | random.Random
    ) -> tuple[FeatureVector, tuple[int, int]]:
        """Imagined vector plus the two parent instances it was composed from."""
        schema = self.store.occurrences.schema(class_id)
        if len(noise) != schema.ndim:
            raise ArityError(f"class {class_id!r} expects {schema.ndim} noise bounds")
        if any(n < 0 for n in noise):
            raise ValueError("noise bounds must be non-negative")
        members = self.store.occurrences.tree_sets[class_id].members
        if not members:
            raise FeatureError(f"class {class_id!r} has no occurrences to imagine from")
        rng = seed if isinstance(seed, random.Random) else random.Random(seed)
        pa, pb = members[rng.randrange(len(members))], members[rng.randrange(len(members))]
        ba = self.store.occurrences.get(pa).vector.bins
        bb = self.store.occurrences.get(pb).vector.bins
        bins = []
        for d, spec in enumerate(schema.dims):
            base = ba[d] if rng.random() < 0.5 else bb[d]
            b = base + rng.randint(-noise[d], noise[d])
            bins.append(min(max(b, 0), spec.bin_count - 1))
        return vector_from_bins(schema, bins), (pa, pb)

    def imagine(self, class_id: str, noise: Sequence[int], seed: int | random.Random) -> FeatureVector:
        """Sample a novel vector near stored experience; the store is not modified."""
        return self.imagine_detailed(class_id, noise, seed)[0]
