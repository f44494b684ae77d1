"""Compare the compiled kernels with the pure-Python fallback.

Times each kernel on posting lists shaped like the ones the query engine
intersects, then times whole queries on a large store with each
implementation swapped in. Usage::

    python benchmarks/bench_kernels.py [--occurrences 100000] [--repeat 50]
"""

from __future__ import annotations

import argparse
import random
import statistics
import sys
import time
from array import array
from contextlib import contextmanager

from epimem import _pykernels, kernels
from epimem.cue import ANY, Cue, Exact
from epimem.features import ClassSchema, DimensionSpec, Kind, vector_from_bins
from epimem.query import QueryEngine
from epimem.store import MemoryStore

try:
    from epimem import _kernels
except ImportError:
    _kernels = None


def median_ms(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times) * 1e3


@contextmanager
def using(impl):
    saved = {name: getattr(kernels, name) for name in ("intersect_sorted", "merge_disjoint", "fold_deltas")}
    for name in saved:
        setattr(kernels, name, getattr(impl, name))
    try:
        yield
    finally:
        for name, fn in saved.items():
            setattr(kernels, name, fn)


def build_store(n: int, ndim: int, bins: int, seed: int) -> MemoryStore:
    rng = random.Random(seed)
    schema = ClassSchema("obj", Kind.OBJECT, tuple(DimensionSpec(f"d{i}", 0, bins, 1) for i in range(ndim)))
    store = MemoryStore([schema])
    while len(store.occurrences) < n:
        store.occurrences.find_or_create("obj", vector_from_bins(schema, [rng.randrange(bins) for _ in range(ndim)]))
    return store


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--occurrences", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    impls = [_pykernels] + ([_kernels] if _kernels is not None else [])
    if _kernels is None:
        print("compiled extension not built; only the fallback is timed")
    rng = random.Random(args.seed)

    n = args.occurrences
    big = array("q", sorted(rng.sample(range(n), n // 16)))
    mid = array("q", sorted(rng.sample(range(n), n // 16)))
    small = array("q", sorted(rng.sample(range(n), 50)))
    parts = [array("q", range(k, n, 8)) for k in range(8)]
    ops = array("b", [rng.randrange(2) for _ in range(256)])
    ids = array("q", [rng.randrange(1000) for _ in range(256)])
    cases = {
        "intersect equal": lambda m: m.intersect_sorted(big, mid),
        "intersect skewed": lambda m: m.intersect_sorted(small, big),
        "merge 8 lists": lambda m: m.merge_disjoint(parts),
        "fold 256 deltas": lambda m: m.fold_deltas(set(), ops, ids, 0, 256),
    }
    print(f"{'kernel':<18}" + "".join(f"{m.IMPLEMENTATION + ' ms':>14}" for m in impls) + f"{'speedup':>10}")
    for name, fn in cases.items():
        ms = [median_ms(lambda m=m: fn(m), args.repeat) for m in impls]
        ratio = f"{ms[0] / ms[-1]:.1f}x" if len(ms) > 1 and ms[-1] > 0 else "-"
        print(f"{name:<18}" + "".join(f"{x:>14.4f}" for x in ms) + f"{ratio:>10}")

    store = build_store(n, 8, 16, args.seed)
    engine = QueryEngine(store)
    cues = []
    for _ in range(100):
        src = store.occurrences.get(rng.randrange(n)).vector.bins
        fixed = set(rng.sample(range(8), 3))
        cues.append(Cue("obj", tuple(Exact(b) if d in fixed else ANY for d, b in enumerate(src))))
    answers = []
    row = []
    for m in impls:
        with using(m):
            answers.append([engine.query(c) for c in cues])
            row.append(median_ms(lambda: [engine.query(c) for c in cues], max(3, args.repeat // 10)) / len(cues))
    assert all(a == answers[0] for a in answers), "implementations disagree"
    ratio = f"{row[0] / row[-1]:.1f}x" if len(row) > 1 and row[-1] > 0 else "-"
    print(f"{'query (per cue)':<18}" + "".join(f"{x:>14.4f}" for x in row) + f"{ratio:>10}")
    print(f"selected at import: {kernels.IMPLEMENTATION}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
