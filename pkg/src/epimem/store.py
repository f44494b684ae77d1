"""The memory store: occurrences, tree sets, working memory and episodic log,
plus the persistent line-delimited store file.

Store file layout (JSON lines, compact, keys sorted)::

    {"type":"header","format":"epimem-store","version":1,"schema_digest":...,"schemas":[...],
     "decay_ttl":3,"snapshot_interval":256,"now":120,"next_leaf_id":41,"counts":{...}}
    {"type":"leaf","id":0,"class":"obj","dim":0,"bin":3}              one per leaf, by id
    {"type":"occ","id":0,"class":"obj","raw":[...],"bins":[...],
     "participants":[],"intervals":[[5,9],[12,null]]}                 one per occurrence, by id
    {"type":"delta","seq":0,"ts":5,"op":"add","id":0}                 one per delta, by seq
    {"type":"snap","at_seq":255,"ts":77,"present":[...]}              one per snapshot
    {"type":"wm","id":0,"last_refresh":118}                           working-memory entries

Loading re-checks every invariant and raises :class:`StoreFormatError` on the
first violation; a store that loads is a store every query can trust.
"""

from __future__ import annotations

import io
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Sequence

from .episodic_log import DEFAULT_SNAPSHOT_INTERVAL, BeliefDelta, Direction, EpisodicLog, Op
from .errors import EpimemError, StoreFormatError, UnknownInstanceError
from .features import ClassSchema, Kind, make_vector
from .formats import Frame, dumps_compact, schema_digest, schema_from_dict, schema_to_dict
from .occurrence import MemoryOccurrence, OccurrenceStore, PresenceInterval
from .tree_index import Digest, Leaf, hash_leaves
from .working_memory import Event, WmEntry, WorkingMemory

STORE_FORMAT = "epimem-store"
STORE_VERSION = 1
DEFAULT_DECAY_TTL = 3

_OPS = {"add": Op.ADD, "remove": Op.REMOVE}
_OP_NAMES = {v: k for k, v in _OPS.items()}


@dataclass
class IngestStats:
    frames: int = 0
    items: int = 0
    new: int = 0
    reentered: int = 0
    refreshed: int = 0


class MemoryStore:
    def __init__(
        self,
        schemas: Iterable[ClassSchema],
        decay_ttl: int = DEFAULT_DECAY_TTL,
        snapshot_interval: int = DEFAULT_SNAPSHOT_INTERVAL,
        digest: Digest = hash_leaves,
    ) -> None:
        self.occurrences = OccurrenceStore(schemas, digest)
        self.log = EpisodicLog(snapshot_interval)
        self.wm = WorkingMemory(self.occurrences, self.log, decay_ttl)

    @property
    def schemas(self) -> dict[str, ClassSchema]:
        return self.occurrences.schemas

    @property
    def decay_ttl(self) -> int:
        return self.wm.decay_ttl

    @property
    def snapshot_interval(self) -> int:
        return self.log.snapshot_interval

    @property
    def now(self) -> int:
        return self.wm.now

    # --- ingestion ------------------------------------------------------

    def observe(
        self, class_id: str, raw: Sequence[float], participants: Sequence[int] = (), now: int | None = None
    ) -> tuple[int, Event]:
        return self.wm.observe(class_id, raw, participants, now)

    def tick(self, now: int) -> list[int]:
        return self.wm.tick(now)

    def belief(self) -> frozenset[int]:
        return self.wm.belief()

    def ingest_frame(self, frame: Frame, stats: IngestStats | None = None) -> list[int]:
        """Observe every item of ``frame`` then tick; returns the item instance ids."""
        ids: list[int] = []
        for item in frame.items:
            parts = [ids[p] for p in item.participants]
            iid, event = self.observe(item.class_id, item.dims, parts, frame.tick)
            ids.append(iid)
            if stats is not None:
                stats.items += 1
                setattr(stats, event.value, getattr(stats, event.value) + 1)
        self.tick(frame.tick)
        if stats is not None:
            stats.frames += 1
        return ids

    def ingest(self, frames: Iterable[Frame]) -> IngestStats:
        stats = IngestStats()
        for frame in frames:
            self.ingest_frame(frame, stats)
        return stats

    # --- time travel ------------------------------------------------------

    def belief_at(self, t: int) -> frozenset[int]:
        return self.log.belief_at(t)

    def step(self, t: int, direction: Direction) -> tuple[int, frozenset[int]] | None:
        return self.log.step(t, direction)

    def episodes_of(self, instance: int) -> list[PresenceInterval]:
        self.occurrences.get(instance)
        try:
            return self.log.episodes_of(instance)
        except UnknownInstanceError:
            # catalogued but never believed
            return []

    def present_at(self, instance: int, t: int) -> bool:
        return self.occurrences.present_at(instance, t)

    def visited_nodes_counter(self) -> int:
        return self.occurrences.visited_nodes_counter()

    # --- persistence --------------------------------------------------------

    def _leaf_records(self) -> list[dict]:
        recs = []
        for cid, ts in self.occurrences.tree_sets.items():
            for d, tree in enumerate(ts.trees):
                for leaf in tree.leaves():
                    recs.append({"type": "leaf", "id": leaf.leaf_id, "class": cid, "dim": d, "bin": leaf.bin})
        recs.sort(key=lambda r: r["id"])
        return recs

    def dump(self, out: IO[str]) -> None:
        schemas = list(self.schemas.values())
        leaves = self._leaf_records()
        header = {
            "type": "header",
            "format": STORE_FORMAT,
            "version": STORE_VERSION,
            "schema_digest": schema_digest(schemas),
            "schemas": [schema_to_dict(s) for s in schemas],
            "decay_ttl": self.decay_ttl,
            "snapshot_interval": self.snapshot_interval,
            "now": self.now,
            "next_leaf_id": self.occurrences.next_leaf_id,
            "counts": {
                "leaves": len(leaves),
                "occurrences": len(self.occurrences),
                "deltas": len(self.log),
                "snapshots": len(self.log.snapshots),
                "wm": len(self.wm.entries),
            },
        }
        w = out.write
        w(dumps_compact(header) + "\n")
        for rec in leaves:
            w(dumps_compact(rec) + "\n")
        for occ in self.occurrences.by_id:
            w(dumps_compact({
                "type": "occ",
                "id": occ.instance_id,
                "class": occ.class_id,
                "raw": list(occ.vector.raw),
                "bins": list(occ.vector.bins),
                "participants": list(occ.participants),
                "intervals": [list(iv.as_pair()) for iv in occ.intervals],
            }) + "\n")
        for d in self.log:
            w(dumps_compact({"type": "delta", "seq": d.seq, "ts": d.ts, "op": _OP_NAMES[d.op], "id": d.instance_id}) + "\n")
        for s in self.log.snapshots:
            w(dumps_compact({"type": "snap", "at_seq": s.at_seq, "ts": s.ts, "present": sorted(s.present)}) + "\n")
        for iid in sorted(self.wm.entries):
            w(dumps_compact({"type": "wm", "id": iid, "last_refresh": self.wm.entries[iid].last_refresh}) + "\n")

    def dumps(self) -> str:
        buf = io.StringIO()
        self.dump(buf)
        return buf.getvalue()

    def save(self, path: str | os.PathLike) -> int:
        """Write atomically; returns the file size in bytes."""
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            self.dump(fh)
        os.replace(tmp, path)
        return path.stat().st_size

    @classmethod
    def load(
        cls,
        path: str | os.PathLike,
        digest: Digest = hash_leaves,
        expect_schemas: Sequence[ClassSchema] | None = None,
    ) -> MemoryStore:
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh, digest, expect_schemas)

    @classmethod
    def loads(
        cls,
        lines: str | Iterable[str],
        digest: Digest = hash_leaves,
        expect_schemas: Sequence[ClassSchema] | None = None,
    ) -> MemoryStore:
        if isinstance(lines, str):
            lines = lines.splitlines()
        try:
            return _Loader(digest, expect_schemas).run(lines)
        except StoreFormatError:
            raise
        except (EpimemError, KeyError, TypeError, ValueError, IndexError) as exc:
            raise StoreFormatError(f"invalid store: {exc}") from exc


class _Loader:
    _ORDER = ("leaf", "occ", "delta", "snap", "wm")

    def __init__(self, digest: Digest, expect: Sequence[ClassSchema] | None) -> None:
        self.digest = digest
        self.expect = expect
        self.lineno = 0

    def fail(self, msg: str) -> StoreFormatError:
        return StoreFormatError(f"line {self.lineno}: {msg}")

    def run(self, lines: Iterable[str]) -> MemoryStore:
        it = iter(lines)
        store, header = self._header(it)
        occs = store.occurrences
        stage = 0
        snaps: list[dict] = []
        wm: dict[int, WmEntry] = {}
        leaves_seen: set[int] = set()
        for line in it:
            self.lineno += 1
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise self.fail(f"invalid JSON: {exc.msg}") from None
            kind = rec.get("type")
            if kind not in self._ORDER:
                raise self.fail(f"unknown record type {kind!r}")
            pos = self._ORDER.index(kind)
            if pos < stage:
                raise self.fail(f"{kind} record out of order")
            stage = pos
            if kind == "leaf":
                self._leaf(occs, rec, leaves_seen, header["next_leaf_id"])
            elif kind == "occ":
                self._occ(occs, rec)
            elif kind == "delta":
                op = _OPS.get(rec["op"])
                if op is None:
                    raise self.fail(f"unknown op {rec['op']!r}")
                try:
                    store.log.append(BeliefDelta(rec["seq"], rec["ts"], op, rec["id"]))
                except EpimemError as exc:
                    raise self.fail(str(exc)) from None
                if not 0 <= rec["id"] < len(occs):
                    raise self.fail(f"delta for unknown instance {rec['id']}")
            elif kind == "snap":
                snaps.append(rec)
            else:
                iid = rec["id"]
                if iid in wm:
                    raise self.fail(f"duplicate working-memory entry {iid}")
                wm[iid] = WmEntry(iid, rec["last_refresh"])
        occs.next_leaf_id = header["next_leaf_id"]
        self._crosscheck(store, header, snaps, wm, leaves_seen)
        store.wm.entries = dict(sorted(wm.items()))
        store.wm.now = header["now"]
        occs.counter.take()
        return store

    def _header(self, it) -> tuple[MemoryStore, dict]:
        for line in it:
            self.lineno += 1
            if line.strip():
                break
        else:
            raise StoreFormatError("store file is empty")
        try:
            h = json.loads(line)
        except json.JSONDecodeError as exc:
            raise self.fail(f"invalid JSON: {exc.msg}") from None
        if h.get("type") != "header" or h.get("format") != STORE_FORMAT:
            raise self.fail("first record must be a store header")
        if h.get("version") != STORE_VERSION:
            raise self.fail(f"unsupported store version {h.get('version')!r}")
        schemas = [schema_from_dict(s) for s in h["schemas"]]
        if schema_digest(schemas) != h["schema_digest"]:
            raise self.fail("schema digest does not match embedded schemas")
        if self.expect is not None and schema_digest(self.expect) != h["schema_digest"]:
            raise self.fail("store schema does not match the supplied schema file")
        store = MemoryStore(schemas, h["decay_ttl"], h["snapshot_interval"], self.digest)
        return store, h

    def _leaf(self, occs: OccurrenceStore, rec: dict, seen: set[int], next_id: int) -> None:
        lid = rec["id"]
        if lid in seen or not 0 <= lid < next_id:
            raise self.fail(f"leaf id {lid} duplicated or beyond next_leaf_id")
        seen.add(lid)
        ts = occs.tree_sets.get(rec["class"])
        if ts is None:
            raise self.fail(f"leaf for unknown class {rec['class']!r}")
        d, b = rec["dim"], rec["bin"]
        if not 0 <= d < ts.ndim or not 0 <= b < occs.schemas[rec["class"]].dims[d].bin_count:
            raise self.fail(f"leaf {lid} has invalid dim/bin")
        try:
            ts.trees[d].attach(Leaf(b, lid))
        except EpimemError as exc:
            raise self.fail(str(exc)) from None

    def _occ(self, occs: OccurrenceStore, rec: dict) -> None:
        iid = rec["id"]
        if iid != len(occs):
            raise self.fail(f"occurrence ids must be dense: expected {len(occs)}, got {iid}")
        schema = occs.schema(rec["class"])
        vec = make_vector(schema, rec["raw"])
        if list(vec.bins) != rec["bins"]:
            raise self.fail(f"occurrence {iid}: stored bins disagree with raw values")
        ts = occs.tree_sets[schema.class_id]
        if ts.lookup_exact(vec.bins) is None:
            raise self.fail(f"occurrence {iid}: bins not covered by leaf records")
        parts = tuple(rec["participants"])
        for p in parts:
            if not 0 <= p < iid or occs.schemas[occs.by_id[p].class_id].kind is not Kind.OBJECT:
                raise self.fail(f"occurrence {iid}: participant {p} is not an earlier object")
        if len(parts) != schema.arity:
            raise self.fail(f"occurrence {iid}: wrong participant count")
        if occs.find(schema.class_id, vec.bins, parts) is not None:
            raise self.fail(f"occurrence {iid} duplicates an earlier identity")
        intervals = []
        for k, (enter, exit_) in enumerate(rec["intervals"]):
            if exit_ is not None and exit_ <= enter:
                raise self.fail(f"occurrence {iid}: empty interval")
            if exit_ is None and k != len(rec["intervals"]) - 1:
                raise self.fail(f"occurrence {iid}: open interval before the last")
            if intervals and enter < intervals[-1].exit:
                raise self.fail(f"occurrence {iid}: overlapping intervals")
            intervals.append(PresenceInterval(enter, exit_))
        leaf_ids, key = ts.insert(vec.bins, iid)
        occs.by_id.append(MemoryOccurrence(iid, schema.class_id, vec, intervals, parts, tuple(leaf_ids)))
        occs.by_hash.setdefault(key, []).append(iid)

    def _crosscheck(self, store: MemoryStore, h: dict, snaps: list[dict], wm: dict, leaves: set[int]) -> None:
        log, occs = store.log, store.occurrences
        counts = h.get("counts", {})
        actual = {
            "leaves": len(leaves),
            "occurrences": len(occs),
            "deltas": len(log),
            "snapshots": len(snaps),
            "wm": len(wm),
        }
        for k, v in actual.items():
            if counts.get(k) != v:
                raise StoreFormatError(f"header count {k}={counts.get(k)} but found {v}")
        rebuilt = [{"at_seq": s.at_seq, "ts": s.ts, "present": sorted(s.present)} for s in log.snapshots]
        if [{k: s[k] for k in ("at_seq", "ts", "present")} for s in snaps] != rebuilt:
            raise StoreFormatError("snapshots disagree with the replayed delta log")
        for occ in occs.by_id:
            try:
                from_log = [iv.as_pair() for iv in log.episodes_of(occ.instance_id)]
            except UnknownInstanceError:
                from_log = []
            if from_log != [iv.as_pair() for iv in occ.intervals]:
                raise StoreFormatError(f"occurrence {occ.instance_id}: intervals disagree with log")
        if set(wm) != set(log.present) or set(wm) != occs.open_instances():
            raise StoreFormatError("working-memory entries disagree with open intervals")
        now = h["now"]
        if log.last_ts is not None and now < log.last_ts:
            raise StoreFormatError("store clock precedes its last delta")
        for e in wm.values():
            if not occs.by_id[e.instance_id].intervals[-1].enter <= e.last_refresh <= now:
                raise StoreFormatError(f"working-memory entry {e.instance_id}: bad last_refresh")
