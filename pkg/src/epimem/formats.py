"""Text formats: schema files, event logs, and the line tokenizer they share.

Schema file (one directive per line, ``#`` starts a comment)::

    class obj kind=object
    dim shape min=0 max=4 resolution=1
    dim color min=0 max=6 resolution=1
    class rel kind=relation arity=2
    dim predicate min=0 max=3 resolution=1

``dim`` lines belong to the nearest preceding ``class``.

Event log (JSON lines)::

    {"type":"header","format":"epimem-events","version":1,"schema_digest":"...","schemas":[...]}
    {"tick":0}
    {"tick":0,"class":"obj","dims":[0.5,2.5,1.5],"participants":[]}
    {"tick":0,"class":"rel","dims":[0.5],"participants":[0,1]}

A bare ``{"tick":t}`` opens frame ``t``. Item records follow their frame
header. Relation participants are 0-based positions of earlier items in the
same frame, so the log never carries identities the engine would have to
trust. Frames are ingested as: observe every item, then ``tick(t)``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Sequence

from .errors import FeatureError, FormatError
from .features import ClassSchema, DimensionSpec, Kind

EVENT_FORMAT = "epimem-events"
EVENT_VERSION = 1


def dumps_compact(obj: object) -> str:
    return json.dumps(obj, separators=(",", ":"), sort_keys=True)


# --- directive lines --------------------------------------------------------


@dataclass
class Directive:
    lineno: int
    keyword: str
    args: list[str]
    options: dict[str, str]

    def option(self, key: str, default: str | None = None) -> str:
        if key in self.options:
            return self.options[key]
        if default is None:
            raise FormatError(f"{self.keyword}: missing {key}=", self.lineno)
        return default

    def number(self, key: str, default: str | None = None) -> float:
        raw = self.option(key, default)
        try:
            return float(raw)
        except ValueError:
            raise FormatError(f"{self.keyword}: {key}={raw!r} is not a number", self.lineno) from None

    def integer(self, raw: str, what: str) -> int:
        try:
            return int(raw)
        except ValueError:
            raise FormatError(f"{self.keyword}: {what} {raw!r} is not an integer", self.lineno) from None


def iter_directives(text: str) -> Iterator[Directive]:
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        keyword, *rest = line.split()
        args, options = [], {}
        for tok in rest:
            if "=" in tok:
                k, _, v = tok.partition("=")
                if not k or not v:
                    raise FormatError(f"malformed option {tok!r}", lineno)
                if k in options:
                    raise FormatError(f"option {k!r} given twice", lineno)
                options[k] = v
            else:
                if options:
                    raise FormatError(f"positional {tok!r} after options", lineno)
                args.append(tok)
        yield Directive(lineno, keyword, args, options)


# --- schemas -----------------------------------------------------------------


def parse_schemas(text: str) -> list[ClassSchema]:
    pending: list[tuple[Directive, list[DimensionSpec]]] = []
    for d in iter_directives(text):
        try:
            if d.keyword == "class":
                if len(d.args) != 1:
                    raise FormatError("class: expected exactly one class id", d.lineno)
                pending.append((d, []))
            elif d.keyword == "dim":
                if not pending:
                    raise FormatError("dim before any class", d.lineno)
                if len(d.args) != 1:
                    raise FormatError("dim: expected exactly one dimension name", d.lineno)
                pending[-1][1].append(
                    DimensionSpec(d.args[0], d.number("min"), d.number("max"), d.number("resolution"))
                )
            else:
                raise FormatError(f"unknown directive {d.keyword!r}", d.lineno)
        except FeatureError as exc:
            raise FormatError(str(exc), d.lineno) from None
    out: list[ClassSchema] = []
    seen: set[str] = set()
    for d, dims in pending:
        try:
            kind = Kind(d.option("kind", "object"))
        except ValueError:
            raise FormatError(f"class: unknown kind {d.options['kind']!r}", d.lineno) from None
        arity = d.integer(d.option("arity", "0" if kind is Kind.OBJECT else "2"), "arity")
        try:
            schema = ClassSchema(d.args[0], kind, tuple(dims), arity)
        except FeatureError as exc:
            raise FormatError(str(exc), d.lineno) from None
        if schema.class_id in seen:
            raise FormatError(f"duplicate class {schema.class_id!r}", d.lineno)
        seen.add(schema.class_id)
        out.append(schema)
    if not out:
        raise FormatError("schema file declares no classes")
    return out


def format_schemas(schemas: Iterable[ClassSchema]) -> str:
    lines = []
    for s in schemas:
        lines.append(f"class {s.class_id} kind={s.kind.value} arity={s.arity}")
        for d in s.dims:
            lines.append(f"dim {d.name} min={d.min!r} max={d.max!r} resolution={d.resolution!r}")
    return "\n".join(lines) + "\n"


def schema_to_dict(s: ClassSchema) -> dict:
    return {
        "class_id": s.class_id,
        "kind": s.kind.value,
        "arity": s.arity,
        "dims": [[d.name, d.min, d.max, d.resolution] for d in s.dims],
    }


def schema_from_dict(obj: dict) -> ClassSchema:
    return ClassSchema(
        obj["class_id"],
        Kind(obj["kind"]),
        tuple(DimensionSpec(n, float(lo), float(hi), float(r)) for n, lo, hi, r in obj["dims"]),
        int(obj["arity"]),
    )


def schema_digest(schemas: Iterable[ClassSchema]) -> str:
    blob = dumps_compact([schema_to_dict(s) for s in schemas]).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# --- event logs ----------------------------------------------------------------


@dataclass
class EventItem:
    class_id: str
    dims: list[float]
    participants: list[int] = field(default_factory=list)


@dataclass
class Frame:
    tick: int
    items: list[EventItem] = field(default_factory=list)


def write_events(out: IO[str], schemas: Sequence[ClassSchema], frames: Iterable[Frame]) -> int:
    """Write a complete event log; returns the number of item records."""
    header = {
        "type": "header",
        "format": EVENT_FORMAT,
        "version": EVENT_VERSION,
        "schema_digest": schema_digest(schemas),
        "schemas": [schema_to_dict(s) for s in schemas],
    }
    out.write(dumps_compact(header) + "\n")
    n = 0
    for frame in frames:
        out.write(dumps_compact({"tick": frame.tick}) + "\n")
        for item in frame.items:
            rec = {"tick": frame.tick, "class": item.class_id, "dims": item.dims, "participants": item.participants}
            out.write(dumps_compact(rec) + "\n")
            n += 1
    return n


def read_events(lines: Iterable[str]) -> tuple[list[ClassSchema], list[Frame]]:
    schemas: list[ClassSchema] | None = None
    frames: list[Frame] = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc.msg}", lineno) from None
        if not isinstance(rec, dict):
            raise FormatError("record must be a JSON object", lineno)
        if schemas is None:
            if rec.get("type") != "header" or rec.get("format") != EVENT_FORMAT:
                raise FormatError("first record must be an event-log header", lineno)
            if rec.get("version") != EVENT_VERSION:
                raise FormatError(f"unsupported event-log version {rec.get('version')!r}", lineno)
            try:
                schemas = [schema_from_dict(s) for s in rec["schemas"]]
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"bad schema in header: {exc}", lineno) from None
            if schema_digest(schemas) != rec.get("schema_digest"):
                raise FormatError("header schema digest does not match its schemas", lineno)
            continue
        tick = rec.get("tick")
        if not isinstance(tick, int) or isinstance(tick, bool) or tick < 0:
            raise FormatError("tick must be a non-negative integer", lineno)
        if "class" not in rec:
            if frames and tick <= frames[-1].tick:
                raise FormatError(f"frame {tick} does not follow frame {frames[-1].tick}", lineno)
            frames.append(Frame(tick))
            continue
        if not frames or frames[-1].tick != tick:
            raise FormatError(f"item for tick {tick} outside its frame", lineno)
        frame = frames[-1]
        dims, parts = rec.get("dims"), rec.get("participants", [])
        if not isinstance(rec["class"], str):
            raise FormatError("class must be a string", lineno)
        if not isinstance(dims, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in dims
        ):
            raise FormatError("dims must be a list of numbers", lineno)
        if not isinstance(parts, list) or not all(
            isinstance(p, int) and not isinstance(p, bool) and 0 <= p < len(frame.items) for p in parts
        ):
            raise FormatError("participants must index earlier items of the same frame", lineno)
        frame.items.append(EventItem(rec["class"], [float(v) for v in dims], list(parts)))
    if schemas is None:
        raise FormatError("event log is empty (no header)")
    return schemas, frames
