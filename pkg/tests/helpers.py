from __future__ import annotations

import random

from epimem.episodic_log import Op
from epimem.cue import ANY, Cue, Exact, Range
from epimem.features import ClassSchema, DimensionSpec, Kind, vector_from_bins
from epimem.oracle import FlatStore
from epimem.store import MemoryStore


def grid_schema(class_id: str = "obj", ndim: int = 3, bins: int = 10, kind: Kind = Kind.OBJECT, arity: int = 0):
    dims = tuple(DimensionSpec(f"d{i}", 0.0, float(bins), 1.0) for i in range(ndim))
    return ClassSchema(class_id, kind, dims, arity)


def random_catalog(seed: int, n: int, ndim: int, bins: int = 8, skew: bool = False) -> MemoryStore:
    """Store holding up to ``n`` distinct object occurrences (no belief history).

    Small grids cannot hold ``n`` distinct vectors, so sampling also stops after
    a bounded number of attempts.
    """
    rng = random.Random(seed)
    schema = grid_schema("obj", ndim, bins)
    store = MemoryStore([schema, grid_schema("other", 2, 4)])
    occ = store.occurrences
    n = min(n, bins**ndim)
    attempts = 0
    while len(occ.tree_sets["obj"].members) < n and attempts < 50 * n:
        attempts += 1
        if skew:
            bins_ = [min(bins - 1, int(rng.expovariate(0.7))) for _ in range(ndim)]
        else:
            bins_ = [rng.randrange(bins) for _ in range(ndim)]
        occ.find_or_create("obj", vector_from_bins(schema, bins_))
        if rng.random() < 0.05:
            occ.find_or_create("other", vector_from_bins(store.schemas["other"], [rng.randrange(4), rng.randrange(4)]))
    occ.visited_nodes_counter()
    return store


def random_cue(rng: random.Random, schema: ClassSchema, p_any: float = 0.5) -> Cue:
    dims = []
    for spec in schema.dims:
        n = spec.bin_count
        r = rng.random()
        if r < p_any:
            dims.append(ANY)
        elif r < p_any + (1 - p_any) / 2:
            dims.append(Exact(rng.randrange(n)))
        else:
            lo = rng.randrange(n)
            dims.append(Range(lo, rng.randrange(lo, n)))
    return Cue(schema.class_id, tuple(dims))


def flat_of(store: MemoryStore) -> FlatStore:
    return FlatStore.from_store_file(store.dumps().splitlines())


def random_delta_store(seed: int, n_deltas: int, n_instances: int = 200, snapshot_interval: int = 256,
                       max_gap: int = 3) -> MemoryStore:
    """Store whose log is a random but consistent add/remove stream."""
    rng = random.Random(seed)
    schema = grid_schema("obj", 2, 64)
    store = MemoryStore([schema], snapshot_interval=snapshot_interval)
    occ = store.occurrences
    for i in range(n_instances):
        occ.find_or_create("obj", vector_from_bins(schema, [i // 64, i % 64]))
    present: set[int] = set()
    t = 0
    while len(store.log) < n_deltas:
        t += rng.randrange(max_gap + 1)
        iid = rng.randrange(n_instances)
        if iid in present:
            present.discard(iid)
            store.log.record(t, Op.REMOVE, iid)
        else:
            present.add(iid)
            store.log.record(t, Op.ADD, iid)
    return store
