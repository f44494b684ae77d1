"""Deterministic gridworld that emits ground-truth invariant feature vectors.

Objects sit still on the grid; the agent moves and sees every object within
``view_radius`` (Chebyshev). Each visible object is reported by its
attributes only, never its position, so its vector is the same from any
pose. Relations between visible objects are recomputed from scratch every
tick. Alongside the engine, :func:`run_scenario` tracks what *should* be
believed (seen within the decay TTL) keyed by world identities, for
comparison with the engine's own belief.

World file format (``#`` comments)::

    size 12 12
    view_radius 2
    near_distance 1
    agent 0 0 facing=N
    attribute shape count=4
    attribute color count=6
    predicates left_of above near
    object 1 at=3,4 shape=2 color=0

Attribute category ``k`` maps to raw value ``k + 0.5``, the center of bin
``k`` in a ``[0, count]`` dimension of resolution 1, so distinct categories
never share a bin.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .errors import FormatError
from .features import ClassSchema, DimensionSpec, Kind
from .formats import EventItem, Frame, iter_directives
from .store import MemoryStore

OBJECT_CLASS = "obj"
RELATION_CLASS = "rel"
PREDICATES = ("left_of", "above", "near")
_SYMMETRIC = {"near"}


class Action(enum.Enum):
    MOVE_N = "MoveN"
    MOVE_S = "MoveS"
    MOVE_E = "MoveE"
    MOVE_W = "MoveW"
    TURN_L = "TurnL"
    TURN_R = "TurnR"
    STAY = "Stay"


_FACINGS = ("N", "E", "S", "W")
_MOVES = {
    Action.MOVE_N: (0, -1),
    Action.MOVE_S: (0, 1),
    Action.MOVE_E: (1, 0),
    Action.MOVE_W: (-1, 0),
}


@dataclass(frozen=True)
class WorldObject:
    object_id: int
    position: tuple[int, int]
    attributes: tuple[int, ...]


@dataclass(frozen=True)
class WorldSpec:
    width: int
    height: int
    attributes: tuple[tuple[str, int], ...]
    objects: tuple[WorldObject, ...]
    agent: tuple[int, int] = (0, 0)
    facing: str = "N"
    view_radius: int = 2
    near_distance: int = 1
    predicates: tuple[str, ...] = PREDICATES

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError("world must be at least 1x1")
        if not self._inside(self.agent):
            raise ValueError(f"agent position {self.agent} outside the world")
        if self.facing not in _FACINGS:
            raise ValueError(f"facing must be one of {_FACINGS}")
        if self.view_radius < 0 or self.near_distance < 0:
            raise ValueError("view_radius and near_distance must be >= 0")
        if not self.attributes:
            raise ValueError("at least one attribute is required")
        for p in self.predicates:
            if p not in PREDICATES:
                raise ValueError(f"unknown predicate {p!r}")
        ids, combos = set(), set()
        for o in self.objects:
            if o.object_id in ids:
                raise ValueError(f"duplicate object id {o.object_id}")
            ids.add(o.object_id)
            if not self._inside(o.position):
                raise ValueError(f"object {o.object_id} outside the world")
            if len(o.attributes) != len(self.attributes):
                raise ValueError(f"object {o.object_id}: expected {len(self.attributes)} attributes")
            for v, (name, count) in zip(o.attributes, self.attributes):
                if not 0 <= v < count:
                    raise ValueError(f"object {o.object_id}: {name}={v} outside [0, {count})")
            # identical attributes would be one instance to an invariant perceiver
            if o.attributes in combos:
                raise ValueError(f"object {o.object_id} duplicates another object's attributes")
            combos.add(o.attributes)

    def _inside(self, pos: tuple[int, int]) -> bool:
        return 0 <= pos[0] < self.width and 0 <= pos[1] < self.height

    def schemas(self) -> list[ClassSchema]:
        obj = ClassSchema(
            OBJECT_CLASS,
            Kind.OBJECT,
            tuple(DimensionSpec(name, 0.0, float(count), 1.0) for name, count in self.attributes),
        )
        rel = ClassSchema(
            RELATION_CLASS,
            Kind.RELATION,
            (DimensionSpec("predicate", 0.0, float(len(PREDICATES)), 1.0),),
            arity=2,
        )
        return [obj, rel]


@dataclass(frozen=True)
class PerceptItem:
    class_id: str
    raw: tuple[float, ...]
    participants: tuple[int, ...]
    # world identity, for ground truth only; never written to the event log
    key: tuple


@dataclass(frozen=True)
class Percept:
    tick: int
    items: tuple[PerceptItem, ...]

    def to_frame(self) -> Frame:
        return Frame(
            self.tick,
            [EventItem(i.class_id, list(i.raw), list(i.participants)) for i in self.items],
        )


def step_world(world: WorldSpec, action: Action) -> WorldSpec:
    action = Action(action)
    if action is Action.STAY:
        return world
    if action in _MOVES:
        dx, dy = _MOVES[action]
        x = min(max(world.agent[0] + dx, 0), world.width - 1)
        y = min(max(world.agent[1] + dy, 0), world.height - 1)
        return replace(world, agent=(x, y))
    turn = -1 if action is Action.TURN_L else 1
    return replace(world, facing=_FACINGS[(_FACINGS.index(world.facing) + turn) % 4])


def _chebyshev(a: tuple[int, int], b: tuple[int, int]) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def _holds(pred: str, a: WorldObject, b: WorldObject, near: int) -> bool:
    if pred == "left_of":
        return a.position[0] < b.position[0]
    if pred == "above":
        return a.position[1] < b.position[1]
    return a.object_id < b.object_id and _chebyshev(a.position, b.position) <= near


def perceive(world: WorldSpec, tick: int = 0) -> Percept:
    visible = sorted(
        (o for o in world.objects if _chebyshev(o.position, world.agent) <= world.view_radius),
        key=lambda o: o.object_id,
    )
    items = [
        PerceptItem(OBJECT_CLASS, tuple(v + 0.5 for v in o.attributes), (), ("obj", o.object_id))
        for o in visible
    ]
    for ia, a in enumerate(visible):
        for ib, b in enumerate(visible):
            if ia == ib:
                continue
            for pred in world.predicates:
                if _holds(pred, a, b, world.near_distance):
                    code = PREDICATES.index(pred) + 0.5
                    items.append(
                        PerceptItem(RELATION_CLASS, (code,), (ia, ib), ("rel", pred, a.object_id, b.object_id))
                    )
    return Percept(tick, tuple(items))


@dataclass
class ScenarioResult:
    frames: list[Frame]
    truth: list[frozenset]
    engine: list[frozenset]
    store: MemoryStore
    key_of: dict[int, tuple] = field(default_factory=dict)
    conflicts: list[tuple[int, tuple, tuple]] = field(default_factory=list)

    @property
    def item_count(self) -> int:
        return sum(len(f.items) for f in self.frames)

    @property
    def agrees(self) -> bool:
        return not self.conflicts and self.truth == self.engine


def run_scenario(
    world: WorldSpec,
    actions: Sequence[Action],
    decay_ttl: int = 3,
    snapshot_interval: int = 256,
) -> ScenarioResult:
    store = MemoryStore(world.schemas(), decay_ttl, snapshot_interval)
    result = ScenarioResult([], [], [], store)
    last_seen: dict[tuple, int] = {}
    for tick in range(len(actions) + 1):
        if tick:
            world = step_world(world, actions[tick - 1])
        percept = perceive(world, tick)
        frame = percept.to_frame()
        ids = store.ingest_frame(frame)
        result.frames.append(frame)
        for iid, item in zip(ids, percept.items):
            known = result.key_of.setdefault(iid, item.key)
            if known != item.key:
                result.conflicts.append((iid, known, item.key))
            last_seen[item.key] = tick
        for key in [k for k, t in last_seen.items() if tick - t > decay_ttl]:
            del last_seen[key]
        result.truth.append(frozenset(last_seen))
        result.engine.append(frozenset(result.key_of.get(i, ("?", i)) for i in store.belief()))
    return result


# --- generators and file formats ------------------------------------------------


def random_world(
    seed: int,
    width: int = 12,
    height: int = 12,
    n_objects: int = 10,
    attributes: Sequence[tuple[str, int]] = (("shape", 4), ("color", 6), ("size", 3)),
    view_radius: int = 2,
    near_distance: int = 1,
    predicates: Sequence[str] = PREDICATES,
) -> WorldSpec:
    rng = random.Random(seed)
    attributes = tuple(attributes)
    total = 1
    for _, c in attributes:
        total *= c
    if n_objects > total:
        raise ValueError("more objects than distinct attribute combinations")
    combos: set[tuple[int, ...]] = set()
    objects = []
    while len(objects) < n_objects:
        attrs = tuple(rng.randrange(c) for _, c in attributes)
        if attrs in combos:
            continue
        combos.add(attrs)
        pos = (rng.randrange(width), rng.randrange(height))
        objects.append(WorldObject(len(objects) + 1, pos, attrs))
    agent = (rng.randrange(width), rng.randrange(height))
    return WorldSpec(
        width, height, attributes, tuple(objects), agent, "N", view_radius, near_distance, tuple(predicates)
    )


def random_actions(seed: int, n: int, stay_bias: float = 0.0) -> list[Action]:
    rng = random.Random(seed)
    choices = list(Action)
    out = []
    for _ in range(n):
        out.append(Action.STAY if rng.random() < stay_bias else rng.choice(choices))
    return out


def parse_world(text: str) -> WorldSpec:
    fields: dict[str, object] = {}
    attributes: list[tuple[str, int]] = []
    raw_objects: list[tuple[int, int, dict[str, str], tuple[int, int]]] = []
    for d in iter_directives(text):
        kw = d.keyword
        if kw == "size":
            if len(d.args) != 2:
                raise FormatError("size: expected WIDTH HEIGHT", d.lineno)
            fields["width"], fields["height"] = (d.integer(a, "size") for a in d.args)
        elif kw in ("view_radius", "near_distance"):
            if len(d.args) != 1:
                raise FormatError(f"{kw}: expected one integer", d.lineno)
            fields[kw] = d.integer(d.args[0], kw)
        elif kw == "agent":
            if len(d.args) != 2:
                raise FormatError("agent: expected X Y", d.lineno)
            fields["agent"] = tuple(d.integer(a, "coordinate") for a in d.args)
            fields["facing"] = d.option("facing", "N")
        elif kw == "attribute":
            if len(d.args) != 1:
                raise FormatError("attribute: expected a name", d.lineno)
            attributes.append((d.args[0], d.integer(d.option("count"), "count")))
        elif kw == "predicates":
            bad = [p for p in d.args if p not in PREDICATES]
            if bad or not d.args:
                raise FormatError(f"predicates: unknown {bad or 'empty list'}", d.lineno)
            fields["predicates"] = tuple(d.args)
        elif kw == "object":
            if len(d.args) != 1:
                raise FormatError("object: expected an integer id", d.lineno)
            at = d.option("at").split(",")
            if len(at) != 2:
                raise FormatError("object: at= must be X,Y", d.lineno)
            pos = (d.integer(at[0], "coordinate"), d.integer(at[1], "coordinate"))
            attrs = {k: v for k, v in d.options.items() if k != "at"}
            raw_objects.append((d.lineno, d.integer(d.args[0], "object id"), attrs, pos))
        else:
            raise FormatError(f"unknown directive {kw!r}", d.lineno)
    if "width" not in fields:
        raise FormatError("world file needs a size line")
    names = [a for a, _ in attributes]
    objects = []
    for lineno, oid, attrs, pos in raw_objects:
        if set(attrs) != set(names):
            raise FormatError(f"object {oid}: attributes must be exactly {names}", lineno)
        try:
            values = tuple(int(attrs[n]) for n in names)
            obj = WorldObject(oid, pos, values)
            WorldSpec(fields["width"], fields["height"], tuple(attributes), (obj,))  # type: ignore[arg-type]
        except ValueError as exc:
            raise FormatError(f"object {oid}: {exc}", lineno) from None
        objects.append(obj)
    try:
        return WorldSpec(attributes=tuple(attributes), objects=tuple(objects), **fields)  # type: ignore[arg-type]
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def format_world(world: WorldSpec) -> str:
    lines = [
        f"size {world.width} {world.height}",
        f"view_radius {world.view_radius}",
        f"near_distance {world.near_distance}",
        f"agent {world.agent[0]} {world.agent[1]} facing={world.facing}",
    ]
    lines += [f"attribute {n} count={c}" for n, c in world.attributes]
    lines.append("predicates " + " ".join(world.predicates))
    for o in world.objects:
        attrs = " ".join(f"{n}={v}" for (n, _), v in zip(world.attributes, o.attributes))
        lines.append(f"object {o.object_id} at={o.position[0]},{o.position[1]} {attrs}")
    return "\n".join(lines) + "\n"


def parse_actions(text: str) -> list[Action]:
    out = []
    names = {a.value: a for a in Action}
    for lineno, line in enumerate(text.splitlines(), start=1):
        for tok in line.split("#", 1)[0].split():
            if tok not in names:
                raise FormatError(f"unknown action {tok!r}", lineno)
            out.append(names[tok])
    return out


def format_actions(actions: Iterable[Action]) -> str:
    return "".join(f"{a.value}\n" for a in actions)
