"""The agent's current belief: refresh on presentation, hard-TTL decay on absence.

Every change to the belief set is written to the episodic log as it happens;
refreshing an already-believed instance changes nothing and logs nothing.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

from .episodic_log import EpisodicLog, Op
from .errors import TimeRegressionError
from .features import make_vector
from .occurrence import OccurrenceStore


class Event(enum.Enum):
    NEW = "new"
    REENTERED = "reentered"
    REFRESHED = "refreshed"


@dataclass
class WmEntry:
    instance_id: int
    last_refresh: int


class WorkingMemory:
    def __init__(self, occurrences: OccurrenceStore, log: EpisodicLog, decay_ttl: int) -> None:
        if decay_ttl < 1:
            raise ValueError("decay_ttl must be a positive tick count")
        self.occurrences = occurrences
        self.log = log
        self.decay_ttl = decay_ttl
        self.entries: dict[int, WmEntry] = {}
        self.now = 0

    def _advance(self, now: int) -> None:
        if now < self.now:
            raise TimeRegressionError(f"time {now} precedes current tick {self.now}")
        self.now = now

    def observe(
        self, class_id: str, raw: Sequence[float], participants: Sequence[int] = (), now: int | None = None
    ) -> tuple[int, Event]:
        now = self.now if now is None else now
        if now < self.now:
            raise TimeRegressionError(f"time {now} precedes current tick {self.now}")
        vector = make_vector(self.occurrences.schema(class_id), raw)
        iid, created = self.occurrences.find_or_create(class_id, vector, participants)
        self._advance(now)
        entry = self.entries.get(iid)
        if entry is not None:
            entry.last_refresh = now
            return iid, Event.REFRESHED
        self.entries[iid] = WmEntry(iid, now)
        self.occurrences.open_interval(iid, now)
        self.log.record(now, Op.ADD, iid)
        return iid, Event.NEW if created else Event.REENTERED

    def tick(self, now: int) -> list[int]:
        self._advance(now)
        expired = sorted(
            iid for iid, e in self.entries.items() if now - e.last_refresh > self.decay_ttl
        )
        for iid in expired:
            del self.entries[iid]
            self.occurrences.close_interval(iid, now)
            self.log.record(now, Op.REMOVE, iid)
        return expired

    def belief(self) -> frozenset[int]:
        return frozenset(self.entries)
