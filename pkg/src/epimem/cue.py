"""Query cues: one Exact / Range / Any pattern per dimension.

Text form, as used on the command line::

    class=obj shape=3 color=* size=2..4

``class=`` is mandatory; each other token is ``<dimension>=<pattern>`` with
pattern ``<bin>``, ``<lo>..<hi>`` or ``*``. Dimensions not mentioned are Any.
Patterns are bin indexes, not raw values.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

from .errors import CueError
from .features import ClassSchema, DimensionSpec


@dataclass(frozen=True)
class Exact:
    bin: int


@dataclass(frozen=True)
class Range:
    lo: int
    hi: int


@dataclass(frozen=True)
class AnyValue:
    def __repr__(self) -> str:
        return "Any"


ANY = AnyValue()
Pattern = Union[Exact, Range, AnyValue]


@dataclass(frozen=True)
class Cue:
    class_id: str
    dims: tuple[Pattern, ...]

    @classmethod
    def any(cls, schema: ClassSchema) -> Cue:
        return cls(schema.class_id, (ANY,) * schema.ndim)

    def bounds(self, d: int) -> tuple[int, int] | None:
        p = self.dims[d]
        if isinstance(p, Exact):
            return p.bin, p.bin
        if isinstance(p, Range):
            return p.lo, p.hi
        return None

    def validate(self, schema: ClassSchema) -> None:
        if self.class_id != schema.class_id:
            raise CueError(f"cue for {self.class_id!r} checked against {schema.class_id!r}")
        if len(self.dims) != schema.ndim:
            raise CueError(f"class {schema.class_id!r}: cue needs {schema.ndim} patterns")
        for p, spec in zip(self.dims, schema.dims):
            _check_pattern(p, spec)

    def matches(self, bins: Sequence[int]) -> bool:
        for p, b in zip(self.dims, bins):
            if isinstance(p, Exact):
                if b != p.bin:
                    return False
            elif isinstance(p, Range):
                if not p.lo <= b <= p.hi:
                    return False
        return True

    def to_text(self, schema: ClassSchema) -> str:
        parts = [f"class={self.class_id}"]
        for p, spec in zip(self.dims, schema.dims):
            if isinstance(p, Exact):
                parts.append(f"{spec.name}={p.bin}")
            elif isinstance(p, Range):
                parts.append(f"{spec.name}={p.lo}..{p.hi}")
            else:
                parts.append(f"{spec.name}=*")
        return " ".join(parts)


def _check_pattern(p: Pattern, spec: DimensionSpec) -> None:
    n = spec.bin_count
    if isinstance(p, Exact):
        if not 0 <= p.bin < n:
            raise CueError(f"{spec.name}: bin {p.bin} outside [0, {n})")
    elif isinstance(p, Range):
        if p.lo > p.hi:
            raise CueError(f"{spec.name}: range {p.lo}..{p.hi} is empty")
        if p.lo < 0 or p.hi >= n:
            raise CueError(f"{spec.name}: range {p.lo}..{p.hi} outside [0, {n})")
    elif not isinstance(p, AnyValue):
        raise CueError(f"{spec.name}: unknown pattern {p!r}")


_INT = r"-?\d+"
_RANGE_RE = re.compile(rf"({_INT})\.\.({_INT})")
_EXACT_RE = re.compile(_INT)


def parse_cue(text: str, schemas: Mapping[str, ClassSchema]) -> Cue:
    tokens = text.split()
    if not tokens:
        raise CueError("empty cue")
    class_id = None
    assigned: dict[str, tuple[str, Pattern]] = {}
    for tok in tokens:
        key, sep, val = tok.partition("=")
        if not sep or not key or not val:
            raise CueError(f"bad token {tok!r}: expected name=pattern")
        if key == "class":
            if class_id is not None:
                raise CueError(f"bad token {tok!r}: class given twice")
            class_id = val
            continue
        if val == "*":
            pat: Pattern = ANY
        elif m := _RANGE_RE.fullmatch(val):
            pat = Range(int(m.group(1)), int(m.group(2)))
        elif _EXACT_RE.fullmatch(val):
            pat = Exact(int(val))
        else:
            raise CueError(f"bad token {tok!r}: pattern must be N, LO..HI or *")
        if key in assigned:
            raise CueError(f"bad token {tok!r}: dimension {key!r} given twice")
        assigned[key] = (tok, pat)
    if class_id is None:
        raise CueError("cue must name a class with class=<id>")
    if class_id not in schemas:
        raise CueError(f"bad token 'class={class_id}': unknown class")
    schema = schemas[class_id]
    names = {d.name for d in schema.dims}
    for key, (tok, _) in assigned.items():
        if key not in names:
            raise CueError(f"bad token {tok!r}: class {class_id!r} has no dimension {key!r}")
    dims = tuple(assigned[d.name][1] if d.name in assigned else ANY for d in schema.dims)
    for spec in schema.dims:
        if spec.name in assigned:
            tok, pat = assigned[spec.name]
            try:
                _check_pattern(pat, spec)
            except CueError as exc:
                raise CueError(f"bad token {tok!r}: {exc}") from None
    return Cue(class_id, dims)
