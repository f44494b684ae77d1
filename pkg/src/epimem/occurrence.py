"""Memory occurrences and the hash-keyed catalog of every instance ever believed."""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import (
    ArityError,
    FeatureError,
    IntervalError,
    TimeRegressionError,
    UnknownClassError,
    UnknownInstanceError,
)
from .features import ClassSchema, FeatureVector, Kind, validate_vector
from .tree_index import Digest, HashKey, TreeSet, VisitCounter, hash_leaves


@dataclass
class PresenceInterval:
    """Half-open ``[enter, exit)``; ``exit is None`` while still present."""

    enter: int
    exit: int | None = None

    def contains(self, t: int) -> bool:
        return self.enter <= t and (self.exit is None or t < self.exit)

    def as_pair(self) -> tuple[int, int | None]:
        return (self.enter, self.exit)


@dataclass
class MemoryOccurrence:
    instance_id: int
    class_id: str
    vector: FeatureVector
    intervals: list[PresenceInterval] = field(default_factory=list)
    participants: tuple[int, ...] = ()
    leaf_ids: tuple[int, ...] = ()

    @property
    def is_open(self) -> bool:
        return bool(self.intervals) and self.intervals[-1].exit is None


class OccurrenceStore:
    """Schemas, tree sets, and the ``by_id`` / ``by_hash`` occurrence tables."""

    def __init__(self, schemas: Iterable[ClassSchema], digest: Digest = hash_leaves) -> None:
        self.schemas: dict[str, ClassSchema] = {}
        for s in schemas:
            if s.class_id in self.schemas:
                raise FeatureError(f"duplicate class {s.class_id!r}")
            self.schemas[s.class_id] = s
        self.counter = VisitCounter()
        self.digest = digest
        self.next_leaf_id = 0
        self.tree_sets = {
            cid: TreeSet(cid, s.ndim, self.counter, self._alloc_leaf, digest)
            for cid, s in self.schemas.items()
        }
        self.by_id: list[MemoryOccurrence] = []
        self.by_hash: dict[HashKey, list[int]] = {}

    def _alloc_leaf(self) -> int:
        lid = self.next_leaf_id
        self.next_leaf_id += 1
        return lid

    def __len__(self) -> int:
        return len(self.by_id)

    def schema(self, class_id: str) -> ClassSchema:
        try:
            return self.schemas[class_id]
        except KeyError:
            raise UnknownClassError(class_id) from None

    def tree_set(self, class_id: str) -> TreeSet:
        self.schema(class_id)
        return self.tree_sets[class_id]

    def get(self, instance: int) -> MemoryOccurrence:
        if not 0 <= instance < len(self.by_id):
            raise UnknownInstanceError(instance)
        return self.by_id[instance]

    def visited_nodes_counter(self) -> int:
        return self.counter.take()

    # --- identity -----------------------------------------------------

    def _check_participants(self, schema: ClassSchema, participants: Sequence[int]) -> tuple[int, ...]:
        parts = tuple(int(p) for p in participants)
        if len(parts) != schema.arity:
            raise ArityError(
                f"class {schema.class_id!r} takes {schema.arity} participants, got {len(parts)}"
            )
        for p in parts:
            if not 0 <= p < len(self.by_id) or self.schemas[self.by_id[p].class_id].kind is not Kind.OBJECT:
                raise UnknownInstanceError(p)
        return parts

    def instances_by_hash(self, key: HashKey, bins: Sequence[int]) -> list[int]:
        bins = tuple(bins)
        return [i for i in self.by_hash.get(key, ()) if self.by_id[i].vector.bins == bins]

    def find(self, class_id: str, bins: Sequence[int], participants: Sequence[int] = ()) -> int | None:
        hit = self.tree_set(class_id).lookup_exact(bins)
        if hit is None:
            return None
        parts = tuple(participants)
        for i in self.instances_by_hash(hit[1], bins):
            occ = self.by_id[i]
            if occ.class_id == class_id and occ.participants == parts:
                return i
        return None

    def find_or_create(
        self, class_id: str, vector: FeatureVector, participants: Sequence[int] = ()
    ) -> tuple[int, bool]:
        schema = self.schema(class_id)
        validate_vector(schema, vector)
        parts = self._check_participants(schema, participants)
        found = self.find(class_id, vector.bins, parts)
        if found is not None:
            return found, False
        iid = len(self.by_id)
        leaf_ids, key = self.tree_sets[class_id].insert(vector.bins, iid)
        self.by_id.append(MemoryOccurrence(iid, class_id, vector, [], parts, tuple(leaf_ids)))
        self.by_hash.setdefault(key, []).append(iid)
        return iid, True

    # --- presence -----------------------------------------------------

    def open_interval(self, instance: int, enter: int) -> None:
        occ = self.get(instance)
        if occ.intervals:
            last = occ.intervals[-1]
            if last.exit is None:
                raise IntervalError(f"instance {instance} already present since {last.enter}")
            if enter < last.exit:
                raise TimeRegressionError(
                    f"instance {instance}: enter {enter} precedes previous exit {last.exit}"
                )
        occ.intervals.append(PresenceInterval(enter))

    def close_interval(self, instance: int, exit: int) -> None:
        occ = self.get(instance)
        if not occ.is_open:
            raise IntervalError(f"instance {instance} has no open interval")
        last = occ.intervals[-1]
        if exit <= last.enter:
            raise IntervalError(
                f"instance {instance}: exit {exit} must be after enter {last.enter}"
            )
        last.exit = exit

    def present_at(self, instance: int, t: int) -> bool:
        ivs = self.get(instance).intervals
        i = bisect_right(ivs, t, key=lambda iv: iv.enter) - 1
        return i >= 0 and ivs[i].contains(t)

    def open_instances(self) -> set[int]:
        return {o.instance_id for o in self.by_id if o.is_open}
