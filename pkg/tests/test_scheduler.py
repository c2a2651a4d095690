import random

import pytest
from hypothesis import given, settings, strategies as st

from helpers import check_invariants, random_workload, run_workload

from d2dsim.scheduler import (InvalidPattern, Leg, OrphanRelay, Phase, ScheduleRequest,
                              build_frame, round_robin_schedule, two_phase_schedule)


def req(sid, n, leg=Leg.CELLULAR):
    return ScheduleRequest(sid, sid, -1, leg, n)


def test_default_frame_capacity():
    g = build_frame(0)
    assert g.capacity == 36
    assert g.uplink_subframes == (2, 3, 4, 5, 8, 9)
    assert g.free_count() == 36


def test_pattern_with_five_uplink_rejected():
    with pytest.raises(InvalidPattern):
        build_frame(0, "DSUUUDDSUU")
    with pytest.raises(InvalidPattern):
        build_frame(0, "DSUUUU")


def test_frame_keys_ordered():
    a, b = build_frame(0), build_frame(1)
    assert max(a.key(sf) for sf in a.uplink_subframes) < min(b.key(sf) for sf in b.uplink_subframes)


def test_round_robin_interleaves():
    grid, left = round_robin_schedule([req(0, 3), req(1, 3)], build_frame(0))
    assert left == []
    assert [e.session_id for _, e in grid.log] == [0, 1, 0, 1, 0, 1]
    assert [c for c, _ in grid.log] == [(2, 0), (2, 1), (2, 2), (2, 3), (2, 4), (2, 5)]


def test_round_robin_capacity():
    grid, left = round_robin_schedule([req(0, 40)], build_frame(0))
    assert len(grid.allocations) == 36
    assert [r.rbs_needed for r in left] == [4]


def test_round_robin_empty():
    grid, left = round_robin_schedule([], build_frame(0))
    assert grid.allocations == {} and left == []


def test_request_needs_positive_rbs():
    with pytest.raises(ValueError):
        req(0, 0)


def test_relay_after_phase1_same_frame():
    p1 = [ScheduleRequest(0, 0, 7, Leg.D2D_OFFLOAD, 18)]
    p2 = [ScheduleRequest(0, 7, -1, Leg.D2D_RELAY, 5)]
    (grid,), l1, l2 = two_phase_schedule(p1, p2, [build_frame(0)])
    assert l1 == [] and l2 == []
    last1 = max(grid.key(sf) for (sf, _), e in grid.log if e.phase is Phase.PHASE1)
    assert last1 == (0, 4)
    assert all(grid.key(sf) > (0, 4) for (sf, _), e in grid.log if e.phase is Phase.PHASE2)


def test_relay_spills_to_next_frame():
    p1 = [ScheduleRequest(0, 0, 7, Leg.D2D_OFFLOAD, 36)]
    p2 = [ScheduleRequest(0, 7, -1, Leg.D2D_RELAY, 3)]
    grids, l1, l2 = two_phase_schedule(p1, p2, [build_frame(0), build_frame(1)])
    assert len(grids) == 2 and not l1 and not l2
    assert all(e.phase is Phase.PHASE1 for e in grids[0].allocations.values())
    assert [e.leg for e in grids[1].allocations.values()] == [Leg.D2D_RELAY] * 3


def test_no_d2d_equals_round_robin():
    reqs = [req(0, 7), req(1, 2), req(2, 40)]
    (a,), left_a, _ = two_phase_schedule(reqs, [], [build_frame(0)])
    b, left_b = round_robin_schedule(reqs, build_frame(0))
    assert a.log == b.log and left_a == left_b


def test_orphan_relay_rejected():
    with pytest.raises(OrphanRelay):
        two_phase_schedule([], [ScheduleRequest(3, 7, -1, Leg.D2D_RELAY, 1)], [build_frame(0)])


def test_leg_phase_mismatch_rejected():
    with pytest.raises(ValueError):
        two_phase_schedule([ScheduleRequest(0, 7, -1, Leg.D2D_RELAY, 1)], [], [build_frame(0)])


def test_relay_with_earlier_phase1_history():
    p2 = [ScheduleRequest(0, 7, -1, Leg.D2D_RELAY, 2)]
    (grid,), _, left = two_phase_schedule([], p2, [build_frame(3)], phase1_done={0: (2, 9)})
    assert not left and len(grid.allocations) == 2


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_workload_invariants(seed):
    p1, p2 = random_workload(random.Random(seed))
    grids, l1, l2 = run_workload(p1, p2)
    assert check_invariants(p1, p2, grids, l1, l2) == []


@given(st.lists(st.integers(1, 15), min_size=1, max_size=8))
def test_round_robin_fairness(demands):
    reqs = [req(i, n) for i, n in enumerate(demands)]
    grid, _ = round_robin_schedule(reqs, build_frame(0))
    counts = [0] * len(demands)
    for _, e in grid.log:
        counts[e.session_id] += 1
        # among sessions still wanting RBs, nobody is more than one grant ahead
        open_counts = [c for c, n in zip(counts, demands) if c < n]
        if open_counts:
            assert counts[e.session_id] - min(open_counts) <= 1
