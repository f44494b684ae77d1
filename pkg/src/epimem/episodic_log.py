"""Append-only, time-ordered log of belief deltas with periodic snapshots.

``belief_at(t)`` starts from the newest snapshot at or before the last delta
with ``ts <= t`` and replays fewer than ``snapshot_interval`` deltas on top.
"""

from __future__ import annotations

import enum
from array import array
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Iterator

from . import kernels
from .errors import LogError, TimeRegressionError, UnknownInstanceError
from .occurrence import PresenceInterval

DEFAULT_SNAPSHOT_INTERVAL = 256


class Op(enum.IntEnum):
    REMOVE = 0
    ADD = 1


class Direction(enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass(frozen=True)
class BeliefDelta:
    seq: int
    ts: int
    op: Op
    instance_id: int


@dataclass(frozen=True)
class Snapshot:
    at_seq: int
    ts: int
    present: frozenset[int]


class EpisodicLog:
    def __init__(self, snapshot_interval: int = DEFAULT_SNAPSHOT_INTERVAL) -> None:
        if snapshot_interval < 1:
            raise ValueError("snapshot_interval must be >= 1")
        self.snapshot_interval = snapshot_interval
        self._ts = array("q")
        self._ops = array("b")
        self._ids = array("q")
        self.snapshots: list[Snapshot] = []
        self._present: set[int] = set()
        # per-instance delta positions, for episodes_of
        self._history: dict[int, list[int]] = {}
        self.replayed_last = 0

    def __len__(self) -> int:
        return len(self._ts)

    def __iter__(self) -> Iterator[BeliefDelta]:
        for i in range(len(self._ts)):
            yield self[i]

    def __getitem__(self, seq: int) -> BeliefDelta:
        return BeliefDelta(seq, self._ts[seq], Op(self._ops[seq]), self._ids[seq])

    @property
    def last_ts(self) -> int | None:
        return self._ts[-1] if self._ts else None

    @property
    def present(self) -> frozenset[int]:
        return frozenset(self._present)

    def append(self, delta: BeliefDelta) -> None:
        n = len(self._ts)
        if delta.seq != n:
            raise LogError(f"sequence gap: expected seq {n}, got {delta.seq}")
        if n and delta.ts < self._ts[-1]:
            raise TimeRegressionError(f"delta ts {delta.ts} precedes last ts {self._ts[-1]}")
        if delta.ts < 0:
            raise LogError("timestamps are non-negative")
        iid = delta.instance_id
        op = Op(delta.op)
        if op is Op.ADD:
            if iid in self._present:
                raise LogError(f"Add for instance {iid} already present")
            self._present.add(iid)
        else:
            if iid not in self._present:
                raise LogError(f"Remove for instance {iid} not present")
            self._present.remove(iid)
        self._ts.append(delta.ts)
        self._ops.append(int(op))
        self._ids.append(iid)
        self._history.setdefault(iid, []).append(n)
        if (n + 1) % self.snapshot_interval == 0:
            self.snapshots.append(Snapshot(n, delta.ts, frozenset(self._present)))

    def record(self, ts: int, op: Op, instance_id: int) -> BeliefDelta:
        delta = BeliefDelta(len(self._ts), ts, op, instance_id)
        self.append(delta)
        return delta

    def belief_at(self, t: int) -> frozenset[int]:
        # deltas [0, end) have ts <= t
        end = bisect_right(self._ts, t)
        if end == 0:
            self.replayed_last = 0
            return frozenset()
        k = end // self.snapshot_interval
        if k:
            snap = self.snapshots[k - 1]
            present = set(snap.present)
            start = snap.at_seq + 1
        else:
            present = set()
            start = 0
        self.replayed_last = kernels.fold_deltas(present, self._ops, self._ids, start, end)
        return frozenset(present)

    def step(self, t: int, direction: Direction) -> tuple[int, frozenset[int]] | None:
        if direction is Direction.FORWARD:
            i = bisect_right(self._ts, t)
            if i == len(self._ts):
                return None
        else:
            i = bisect_left(self._ts, t) - 1
            if i < 0:
                return None
        ts = self._ts[i]
        return ts, self.belief_at(ts)

    def timestamps(self) -> list[int]:
        """Distinct delta timestamps, ascending."""
        out: list[int] = []
        for ts in self._ts:
            if not out or out[-1] != ts:
                out.append(ts)
        return out

    def episodes_of(self, instance: int) -> list[PresenceInterval]:
        if instance not in self._history:
            raise UnknownInstanceError(instance)
        out: list[PresenceInterval] = []
        for pos in self._history[instance]:
            if self._ops[pos] == Op.ADD:
                out.append(PresenceInterval(self._ts[pos]))
            else:
                out[-1].exit = self._ts[pos]
        return out

    def deltas_at(self, ts: int) -> list[BeliefDelta]:
        lo, hi = bisect_left(self._ts, ts), bisect_right(self._ts, ts)
        return [self[i] for i in range(lo, hi)]
