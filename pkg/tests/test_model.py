import math
import random

import pytest
from hypothesis import given, strategies as st

from crowdinfluence.errors import DomainError
from crowdinfluence.model import (PLANAR, CandidatePair, Snapshot, SpatialTask, Worker, distance,
                                  eligible_pairs, is_eligible, travel_time)
from oracles import haversine_km


def task(id="s", loc=(0.0, 0.0), pub=0, dur=3600, cats=("food",)):
    return SpatialTask(id, loc, pub, dur, frozenset(cats))


def test_distance_identical_points():
    assert distance((10, 20), (10, 20)) == 0.0


def test_distance_one_degree_of_longitude_on_equator():
    assert distance((0, 0), (0, 1)) == pytest.approx(111.195, abs=0.01)


def test_distance_planar_345():
    assert distance((0, 0), (3, 4), PLANAR) == 5.0
    assert distance((0, 0), (3, 4), "planar") == 5.0


def test_haversine_matches_textbook_formula():
    r = random.Random(3)
    for _ in range(200):
        a = (r.uniform(-89, 89), r.uniform(-179, 179))
        b = (r.uniform(-89, 89), r.uniform(-179, 179))
        assert distance(a, b) == pytest.approx(haversine_km(a, b), rel=1e-9, abs=1e-9)


def test_distance_rejects_bad_coordinates():
    with pytest.raises(DomainError):
        distance((91, 0), (0, 0))
    with pytest.raises(DomainError):
        distance((0, 0), (0, float("nan")), PLANAR)
    with pytest.raises(DomainError):
        distance((0, 0), (0, 1), "manhattan")


@given(st.tuples(*[st.floats(-1e3, 1e3)] * 2), st.tuples(*[st.floats(-1e3, 1e3)] * 2),
       st.tuples(*[st.floats(-1e3, 1e3)] * 2))
def test_planar_triangle_inequality(a, b, c):
    assert distance(a, c, PLANAR) <= distance(a, b, PLANAR) + distance(b, c, PLANAR) + 1e-9


@given(st.tuples(st.floats(-90, 90), st.floats(-180, 180)), st.tuples(st.floats(-90, 90), st.floats(-180, 180)))
def test_haversine_symmetric_nonnegative(a, b):
    d = distance(a, b)
    assert d >= 0
    assert d == pytest.approx(distance(b, a), abs=1e-9)


@pytest.mark.parametrize("d,v,expected", [(5, 5, 3600), (0, 5, 0), (2.5, 5, 1800)])
def test_travel_time(d, v, expected):
    assert travel_time(d, v) == expected


def test_travel_time_rejects_nonpositive_speed():
    with pytest.raises(DomainError):
        travel_time(1, 0)
    with pytest.raises(DomainError):
        travel_time(1, -2)


def test_type_invariants():
    with pytest.raises(DomainError):
        task(dur=0)
    with pytest.raises(DomainError):
        task(cats=())
    with pytest.raises(DomainError):
        task(loc=(0, 200))
    with pytest.raises(DomainError):
        Worker("w", (0, 0), 0)
    with pytest.raises(DomainError):
        Worker("w", (0, 0), 1, speed=0)


def test_snapshot_invariants():
    s = task(pub=100, dur=50)
    Snapshot(100, [], [s])
    with pytest.raises(DomainError):
        Snapshot(150, [], [s])  # expired
    with pytest.raises(DomainError):
        Snapshot(99, [], [s])  # not yet published
    w = Worker("w", (0, 0), 5)
    with pytest.raises(DomainError):
        Snapshot(100, [w, w], [])
    with pytest.raises(DomainError):
        Snapshot(100, [], [s, s])


def test_worker_at_task_location():
    snap = Snapshot(10, [Worker("w", (1, 1), 25)], [task(loc=(1, 1), pub=0, dur=11)])
    pairs = eligible_pairs(snap)
    assert pairs == [CandidatePair("w", "s", 0.0, 0.0)]


def test_pair_outside_reach_radius():
    snap = Snapshot(0, [Worker("w", (0, 0), 25, 1000)], [task(loc=(30, 0), dur=10 ** 6)])
    assert eligible_pairs(snap, PLANAR) == []


def test_pair_without_enough_time():
    # 5 km at 5 km/h needs an hour; the task expires in 30 minutes
    snap = Snapshot(0, [Worker("w", (0, 0), 25, 5)], [task(loc=(5, 0), dur=1800)])
    assert eligible_pairs(snap, PLANAR) == []
    snap = Snapshot(0, [Worker("w", (0, 0), 25, 5)], [task(loc=(5, 0), dur=3600)])
    assert len(eligible_pairs(snap, PLANAR)) == 1


def _random_snapshot(r):
    workers = [Worker(f"w{i}", (r.uniform(0, 20), r.uniform(0, 20)), r.uniform(1, 15), r.uniform(1, 10))
               for i in range(r.randint(0, 7))]
    tasks = [task(f"s{j}", (r.uniform(0, 20), r.uniform(0, 20)), 0, r.randint(1, 20000)) for j in range(r.randint(0, 7))]
    return Snapshot(0, workers, tasks)


def test_eligible_pairs_agree_with_independent_check():
    r = random.Random(9)
    for _ in range(100):
        snap = _random_snapshot(r)
        got = {(p.worker_id, p.task_id) for p in eligible_pairs(snap, PLANAR)}
        want = set()
        for w in snap.workers:
            for s in snap.tasks:
                d = math.hypot(w.location[0] - s.location[0], w.location[1] - s.location[1])
                if d <= w.reach_radius and d / w.speed * 3600 <= s.deadline:
                    want.add((w.id, s.id))
        assert got == want


def test_eligible_pairs_order_and_permutation_invariance():
    r = random.Random(4)
    for _ in range(30):
        snap = _random_snapshot(r)
        ws, ts = list(snap.workers), list(snap.tasks)
        r.shuffle(ws)
        r.shuffle(ts)
        a = eligible_pairs(snap, PLANAR)
        assert a == eligible_pairs(Snapshot(0, ws, ts), PLANAR)
        assert [(p.worker_id, p.task_id) for p in a] == sorted((p.worker_id, p.task_id) for p in a)


def test_is_eligible_returns_none_or_pair():
    w = Worker("w", (0, 0), 10, 5)
    assert is_eligible(w, task(loc=(20, 0)), 0, PLANAR) is None
    p = is_eligible(w, task(loc=(1, 0), dur=3600), 0, PLANAR)
    assert p.distance_km == 1.0 and p.travel_time == 720.0
