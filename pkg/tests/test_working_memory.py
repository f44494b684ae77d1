import random

import pytest
from hypothesis import given, settings, strategies as st

from epimem.episodic_log import Op
from epimem.errors import TimeRegressionError
from epimem.store import MemoryStore
from epimem.working_memory import Event

from helpers import grid_schema

OBJ = grid_schema("obj", 2, 10)


def center(bins):
    return [b + 0.5 for b in bins]


@pytest.fixture
def store():
    return MemoryStore([OBJ], decay_ttl=3)


def ops(store):
    return [(d.ts, d.op, d.instance_id) for d in store.log]


def test_first_observation_is_new(store):
    assert store.observe("obj", center([1, 2]), now=0) == (0, Event.NEW)
    assert ops(store) == [(0, Op.ADD, 0)]
    assert store.belief() == {0}


def test_refresh_is_silent(store):
    store.observe("obj", center([1, 2]), now=0)
    assert store.observe("obj", center([1, 2]), now=1) == (0, Event.REFRESHED)
    assert len(store.log) == 1


def test_three_phase_reentry(store):
    store.observe("obj", center([1, 2]), now=0)
    store.tick(0)
    assert store.tick(4) == [0]
    assert store.belief() == frozenset()
    assert store.observe("obj", center([1, 2]), now=6) == (0, Event.REENTERED)
    # oracle replay of the scripted phases
    assert ops(store) == [(0, Op.ADD, 0), (4, Op.REMOVE, 0), (6, Op.ADD, 0)]
    assert [iv.as_pair() for iv in store.occurrences.get(0).intervals] == [(0, 4), (6, None)]


def test_decay_boundary(store):
    store.observe("obj", center([1, 1]), now=10)
    assert store.tick(13) == []
    assert store.belief() == {0}
    assert store.tick(14) == [0]
    assert ops(store)[-1] == (14, Op.REMOVE, 0)


def test_empty_tick(store):
    assert store.tick(5) == []


def test_removal_order_ascending(store):
    for i in (3, 1, 2, 0):
        store.observe("obj", center([i, i]), now=0)
    assert store.tick(10) == [0, 1, 2, 3]
    assert [d.instance_id for d in store.log][-4:] == [0, 1, 2, 3]


def test_time_must_not_regress(store):
    store.observe("obj", center([1, 1]), now=5)
    with pytest.raises(TimeRegressionError):
        store.observe("obj", center([1, 1]), now=4)
    with pytest.raises(TimeRegressionError):
        store.tick(4)


def test_exit_and_reenter_same_tick(store):
    store.observe("obj", center([1, 1]), now=0)
    store.tick(4)
    assert store.observe("obj", center([1, 1]), now=4) == (0, Event.REENTERED)
    assert store.belief_at(4) == {0}


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 5))
def test_belief_coherence(seed, ttl):
    rng = random.Random(seed)
    store = MemoryStore([OBJ], decay_ttl=ttl)
    folded: set[int] = set()
    seen = 0
    for t in range(60):
        for _ in range(rng.randrange(4)):
            store.observe("obj", center([rng.randrange(3), rng.randrange(3)]), now=t)
        store.tick(t)
        for d in list(store.log)[seen:]:
            (folded.add if d.op is Op.ADD else folded.discard)(d.instance_id)
        seen = len(store.log)
        assert store.belief() == folded
        assert store.belief() == store.occurrences.open_instances()
        assert store.belief() == store.belief_at(t)


def test_slow_variation_reduces_deltas():
    store = MemoryStore([OBJ], decay_ttl=2)
    observations = 0
    # three objects held in view for 20 ticks, then one more for 10
    for t in range(30):
        visible = [[0, 0], [1, 1], [2, 2]] if t < 20 else [[3, 3]]
        for b in visible:
            store.observe("obj", center(b), now=t)
            observations += 1
        store.tick(t)
    # oracle count: 4 adds, 3 removes (at tick 19 + 2 + 1 = 22)
    assert observations == 3 * 20 + 10
    assert len(store.log) == 7
    assert len(store.log) / observations == 7 / 70
