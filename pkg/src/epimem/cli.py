"""Command-line interface.

Exit codes: 0 success, 1 usage or parse error, 2 data or invariant error.
The store path defaults to ``$EPIMEM_STORE`` where a subcommand needs one.
"""

from __future__ import annotations

import argparse
import os
import random
import statistics
import sys
import time
from pathlib import Path
from typing import Sequence

from . import kernels
from .cue import ANY, Cue, Exact, parse_cue
from .episodic_log import Direction
from .errors import CueError, EpimemError, FormatError
from .features import validate_vector, vector_from_bins
from .formats import dumps_compact, parse_schemas, read_events, schema_digest, write_events
from .oracle import FlatStore, scan_query
from .query import QueryEngine
from .sim import format_actions, parse_actions, parse_world, random_actions, random_world, run_scenario
from .store import DEFAULT_DECAY_TTL, MemoryStore

STORE_ENV = "EPIMEM_STORE"
DEFAULT_SEED = 0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _ids(ids) -> str:
    return ",".join(str(i) for i in sorted(ids))


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _store_path(args) -> Path:
    path = args.store or os.environ.get(STORE_ENV)
    if not path:
        raise UsageError(f"no store given (use --store or set {STORE_ENV})")
    return Path(path)


def _load_store(args) -> MemoryStore:
    path = _store_path(args)
    if not path.exists():
        raise UsageError(f"store {path} does not exist")
    expect = parse_schemas(Path(args.schema).read_text()) if getattr(args, "schema", None) else None
    return MemoryStore.load(path, expect_schemas=expect)


def _emit(args, record: dict, text: str) -> None:
    print(dumps_compact(record) if args.format == "records" else text)


# --- subcommands -------------------------------------------------------------


def cmd_simulate(args) -> int:
    if args.world:
        world = parse_world(Path(args.world).read_text())
    else:
        world = random_world(args.seed, n_objects=args.objects)
    if args.actions:
        actions = parse_actions(Path(args.actions).read_text())
    else:
        actions = random_actions(args.seed, args.steps, args.stay_bias)
    result = run_scenario(world, actions, args.ttl)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        n_items = write_events(fh, world.schemas(), result.frames)
    if args.save_actions:
        Path(args.save_actions).write_text(format_actions(actions))
    print(f"ticks={len(result.frames)} percepts={n_items}")
    return 0


def cmd_ingest(args) -> int:
    events_path = Path(args.events)
    if not events_path.exists():
        raise UsageError(f"event log {events_path} does not exist")
    with open(events_path, encoding="utf-8") as fh:
        schemas, frames = read_events(fh)
    if args.schema:
        expect = parse_schemas(Path(args.schema).read_text())
        if schema_digest(expect) != schema_digest(schemas):
            raise EpimemError("event log schema does not match the supplied schema file")
    store = MemoryStore(schemas, args.ttl, args.snapshot_interval)
    stats = store.ingest(frames)
    stored = store.save(_store_path(args))
    raw = events_path.stat().st_size
    ratio = stored / raw if raw else 0.0
    print(
        f"instances={len(store.occurrences)} deltas={len(store.log)} "
        f"snapshots={len(store.log.snapshots)} events={stats.items} "
        f"stored_bytes={stored} raw_bytes={raw} ratio={ratio:.4f}"
    )
    return 0


def cmd_query(args) -> int:
    store = _load_store(args)
    engine = QueryEngine(store)
    cue = parse_cue(args.cue, store.schemas)
    schema = store.schemas[cue.class_id]
    if args.similar is not None:
        if not all(isinstance(p, Exact) for p in cue.dims):
            raise CueError("--similar needs an exact bin for every dimension of the cue")
        if len(args.similar) != schema.ndim:
            raise CueError(f"--similar needs {schema.ndim} radii")
        center = vector_from_bins(schema, [p.bin for p in cue.dims])  # type: ignore[union-attr]
        ids = engine.similar(cue.class_id, center, args.similar)
    else:
        ids = engine.query(cue)
    if args.recall:
        for res in engine.recall_ids(ids):
            ivs = [[iv.enter, iv.exit] for iv in res.intervals]
            _emit(
                args,
                {"id": res.instance_id, "intervals": ivs,
                 "beliefs": [{"t": t, "belief": sorted(b)} for t, b in res.beliefs]},
                f"{res.instance_id} intervals="
                + " ".join(f"[{a},{'-' if b is None else b})" for a, b in ivs)
                + "".join(f"\n  t={t} belief={_ids(b)}" for t, b in res.beliefs),
            )
        return 0
    for iid in ids:
        occ = store.occurrences.get(iid)
        _emit(
            args,
            {"id": iid, "class": occ.class_id, "bins": list(occ.vector.bins),
             "participants": list(occ.participants)},
            f"{iid} class={occ.class_id} bins={','.join(map(str, occ.vector.bins))}"
            + (f" participants={','.join(map(str, occ.participants))}" if occ.participants else ""),
        )
    return 0


def cmd_replay(args) -> int:
    store = _load_store(args)
    direction = Direction(args.direction)
    if args.at is not None:
        seq = [(args.at, store.belief_at(args.at))]
        cur = seq[0]
        while args.steps is None or len(seq) <= args.steps:
            nxt = store.step(cur[0], direction)
            if nxt is None:
                break
            seq.append(nxt)
            cur = nxt
    else:
        if args.instance is None or args.interval is None:
            raise UsageError("replay needs --at T or both --instance and --interval")
        seq = QueryEngine(store).replay(args.instance, args.interval, direction)
    for t, belief in seq:
        _emit(args, {"t": t, "belief": sorted(belief)}, f"t={t} belief={_ids(belief)}")
    return 0


def cmd_bench(args) -> int:
    path = _store_path(args)
    store = _load_store(args)
    with open(path, encoding="utf-8") as fh:
        flat = FlatStore.from_store_file(fh)
    engine = QueryEngine(store)
    rng = random.Random(args.seed)
    print(f"# bench kernels={kernels.IMPLEMENTATION} occurrences={len(store.occurrences)} queries={args.queries}")
    if args.queries == 0:
        return 0
    if not len(store.occurrences):
        raise EpimemError("store has no occurrences to draw cues from")
    eng_t, orc_t, visits, touches = [], [], [], []
    mismatches = 0
    for _ in range(args.queries):
        occ = store.occurrences.get(rng.randrange(len(store.occurrences)))
        schema = store.schemas[occ.class_id]
        k = min(args.exact_dims, schema.ndim)
        fixed = set(rng.sample(range(schema.ndim), k))
        cue = Cue(occ.class_id, tuple(Exact(b) if d in fixed else ANY for d, b in enumerate(occ.vector.bins)))
        store.visited_nodes_counter()
        t0 = time.perf_counter()
        got = engine.query(cue)
        t1 = time.perf_counter()
        visits.append(store.visited_nodes_counter())
        flat.touches = 0
        t2 = time.perf_counter()
        want = scan_query(flat, cue)
        t3 = time.perf_counter()
        touches.append(flat.touches)
        eng_t.append(t1 - t0)
        orc_t.append(t3 - t2)
        mismatches += set(got) != want
    def p95(xs):
        return sorted(xs)[max(0, int(round(0.95 * len(xs))) - 1)]
    med_e, med_o = statistics.median(eng_t), statistics.median(orc_t)
    speedup = med_o / med_e if med_e > 0 else 0.0
    print(f"engine_median_ms={med_e * 1e3:.4f} engine_p95_ms={p95(eng_t) * 1e3:.4f}")
    print(f"oracle_median_ms={med_o * 1e3:.4f} oracle_p95_ms={p95(orc_t) * 1e3:.4f}")
    print(f"median_node_visits={statistics.median(visits)} median_oracle_touches={statistics.median(touches)}")
    print(f"speedup={speedup:.2f} mismatches={mismatches}")
    return 2 if mismatches else 0


def cmd_imagine(args) -> int:
    store = _load_store(args)
    schema = store.occurrences.schema(args.cls)
    noise = args.noise if args.noise is not None else [0] * schema.ndim
    vec = QueryEngine(store).imagine(args.cls, noise, args.seed)
    validate_vector(schema, vec)
    _emit(
        args,
        {"class": vec.class_id, "bins": list(vec.bins), "raw": list(vec.raw)},
        f"class={vec.class_id} bins={','.join(map(str, vec.bins))} raw={','.join(repr(x) for x in vec.raw)}",
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="epimem", description="Episodic memory engine")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_store(sp, schema: bool = True):
        sp.add_argument("--store", help=f"store file (default ${STORE_ENV})")
        if schema:
            sp.add_argument("--schema", help="schema file the store must match")

    def with_format(sp):
        sp.add_argument("--format", choices=("text", "records"), default="text")

    sp = sub.add_parser("simulate", help="run the gridworld and write an event log")
    sp.add_argument("--world", help="world file (default: random world from --seed)")
    sp.add_argument("--actions", help="actions file (default: random walk from --seed)")
    sp.add_argument("--steps", type=int, default=100, help="random-walk length")
    sp.add_argument("--objects", type=int, default=10, help="objects in a random world")
    sp.add_argument("--stay-bias", type=float, default=0.0)
    sp.add_argument("--ttl", type=int, default=DEFAULT_DECAY_TTL)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--save-actions", help="also write the action sequence used")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("ingest", help="build a store from an event log")
    sp.add_argument("events")
    with_store(sp)
    sp.add_argument("--ttl", type=int, default=DEFAULT_DECAY_TTL)
    sp.add_argument("--snapshot-interval", type=int, default=256)
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("query", help="evaluate a cue")
    sp.add_argument("cue", help="e.g. 'class=obj shape=3 color=* size=0..1'")
    with_store(sp)
    with_format(sp)
    sp.add_argument("--recall", action="store_true", help="reconstruct beliefs for each match")
    sp.add_argument("--similar", type=_int_list, metavar="R1,R2,...", help="per-dimension bin radius")
    sp.set_defaults(func=cmd_query)

    sp = sub.add_parser("replay", help="move through stored beliefs")
    with_store(sp)
    with_format(sp)
    sp.add_argument("--at", type=int)
    sp.add_argument("--instance", type=int)
    sp.add_argument("--interval", type=int)
    sp.add_argument("--direction", choices=("forward", "backward"), default="forward")
    sp.add_argument("--steps", type=int, help="limit steps after --at (default: until exhausted)")
    sp.set_defaults(func=cmd_replay)

    sp = sub.add_parser("bench", help="engine vs linear-scan oracle on random selective cues")
    with_store(sp)
    sp.add_argument("--queries", type=int, default=100)
    sp.add_argument("--exact-dims", type=int, default=3)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("imagine", help="sample a novel vector from stored experience")
    sp.add_argument("cls", metavar="CLASS")
    with_store(sp)
    with_format(sp)
    sp.add_argument("--noise", type=_int_list, metavar="N1,N2,...")
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.set_defaults(func=cmd_imagine)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head); not an error
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return 0
    except (UsageError, FormatError, CueError, OSError) as exc:
        print(f"epimem: error: {exc}", file=sys.stderr)
        return 1
    except EpimemError as exc:
        print(f"epimem: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"epimem: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
