"""Brute-force reference implementations.

A :class:`FlatStore` is rebuilt from serialized data (an event log or a store
file), never from a live engine, and holds nothing but plain lists. Retrieval
scans every occurrence; belief reconstruction folds every delta from the
start. Nothing here imports the tree index, the episodic log, or the kernels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .cue import Cue
from .features import make_vector
from .formats import read_events


@dataclass
class FlatOccurrence:
    instance_id: int
    class_id: str
    bins: tuple[int, ...]
    participants: tuple[int, ...]
    intervals: list[list] = field(default_factory=list)


@dataclass
class FlatStore:
    occurrences: list[FlatOccurrence] = field(default_factory=list)
    # (ts, is_add, instance_id) in log order
    deltas: list[tuple[int, bool, int]] = field(default_factory=list)
    touches: int = 0

    @classmethod
    def from_event_log(cls, lines: Iterable[str], decay_ttl: int) -> FlatStore:
        """Ingest an event log with a second, deliberately minimal belief tracker."""
        schemas, frames = read_events(lines)
        by_class = {s.class_id: s for s in schemas}
        flat = cls()
        identity: dict[tuple, int] = {}
        last_seen: dict[int, int] = {}
        for frame in frames:
            ids: list[int] = []
            for item in frame.items:
                bins = make_vector(by_class[item.class_id], item.dims).bins
                parts = tuple(ids[p] for p in item.participants)
                key = (item.class_id, bins, parts)
                iid = identity.get(key)
                if iid is None:
                    iid = identity[key] = len(flat.occurrences)
                    flat.occurrences.append(FlatOccurrence(iid, item.class_id, bins, parts))
                if iid not in last_seen:
                    flat.deltas.append((frame.tick, True, iid))
                    flat.occurrences[iid].intervals.append([frame.tick, None])
                last_seen[iid] = frame.tick
                ids.append(iid)
            for iid in sorted(last_seen):
                if frame.tick - last_seen[iid] > decay_ttl:
                    del last_seen[iid]
                    flat.deltas.append((frame.tick, False, iid))
                    flat.occurrences[iid].intervals[-1][1] = frame.tick
        return flat

    @classmethod
    def from_store_file(cls, lines: Iterable[str]) -> FlatStore:
        flat = cls()
        for line in lines:
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec.get("type") == "occ":
                flat.occurrences.append(
                    FlatOccurrence(
                        rec["id"], rec["class"], tuple(rec["bins"]), tuple(rec["participants"]),
                        [list(iv) for iv in rec["intervals"]],
                    )
                )
            elif rec.get("type") == "delta":
                flat.deltas.append((rec["ts"], rec["op"] == "add", rec["id"]))
        return flat


def scan_query(flat: FlatStore, cue: Cue) -> set[int]:
    out = set()
    for occ in flat.occurrences:
        flat.touches += 1
        if occ.class_id == cue.class_id and cue.matches(occ.bins):
            out.add(occ.instance_id)
    return out


def scan_similar(flat: FlatStore, class_id: str, center: tuple[int, ...], radius: tuple[int, ...]) -> set[int]:
    """Every occurrence within ``radius`` bins of ``center`` on each dimension."""
    out = set()
    for occ in flat.occurrences:
        flat.touches += 1
        if occ.class_id == class_id and all(abs(b - c) <= r for b, c, r in zip(occ.bins, center, radius)):
            out.add(occ.instance_id)
    return out


def replay_belief(flat: FlatStore, t: int) -> set[int]:
    present: set[int] = set()
    for ts, is_add, iid in flat.deltas:
        if ts > t:
            break
        if is_add:
            present.add(iid)
        else:
            present.discard(iid)
    return present


def replay_trace(flat: FlatStore) -> Iterator[tuple[int, frozenset[int]]]:
    """One full fold, yielding the belief after the last delta of each timestamp."""
    present: set[int] = set()
    deltas = flat.deltas
    for i, (ts, is_add, iid) in enumerate(deltas):
        if is_add:
            present.add(iid)
        else:
            present.discard(iid)
        if i + 1 == len(deltas) or deltas[i + 1][0] != ts:
            yield ts, frozenset(present)


def intervals_from_deltas(flat: FlatStore) -> dict[int, list[tuple[int, int | None]]]:
    out: dict[int, list[list]] = {}
    for ts, is_add, iid in flat.deltas:
        if is_add:
            out.setdefault(iid, []).append([ts, None])
        else:
            out[iid][-1][1] = ts
    return {k: [tuple(iv) for iv in v] for k, v in out.items()}
