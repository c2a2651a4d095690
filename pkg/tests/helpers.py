"""Shared workload generators and invariant checks for the scheduler tests."""
from collections import Counter

from d2dsim.scheduler import Leg, Phase, ScheduleRequest, build_frame, two_phase_schedule


def random_workload(rng, max_sessions=12):
    """Phase-1 / Phase-2 request lists for a random mix of sessions."""
    p1, p2 = [], []
    for sid in range(rng.randint(1, max_sessions)):
        kind = rng.choice(["direct", "offload", "offload_ctrl"])
        if kind == "direct":
            p1.append(ScheduleRequest(sid, sid, -1, Leg.CELLULAR, rng.randint(1, 30)))
            continue
        leg = Leg.CONTROL if kind == "offload_ctrl" else Leg.D2D_OFFLOAD
        p1.append(ScheduleRequest(sid, sid, 100 + sid, leg, rng.randint(1, 30)))
        p2.append(ScheduleRequest(sid, 100 + sid, -1, Leg.D2D_RELAY, rng.randint(1, 30)))
    return p1, p2


def run_workload(p1, p2, n_frames=40):
    frames = (build_frame(i) for i in range(n_frames))
    return two_phase_schedule(p1, p2, frames)


def check_invariants(p1, p2, grids, left1, left2):
    """Return a list of violated invariants (empty when the schedule is sound)."""
    errors = []
    for g in grids:
        cells = [c for c, _ in g.log]
        if len(cells) != len(set(cells)) or len(cells) != len(g.allocations):
            errors.append(f"double booking in frame {g.frame_index}")
        if any(g.subframes[sf] != "U" for sf, _ in cells):
            errors.append(f"non-uplink cell used in frame {g.frame_index}")
    last1, first2 = {}, {}
    granted = Counter()
    for g in grids:
        for (sf, _), e in g.log:
            k = (g.frame_index, sf)
            granted[(e.session_id, e.phase)] += 1
            if e.phase is Phase.PHASE1:
                last1[e.session_id] = max(last1.get(e.session_id, k), k)
            else:
                first2[e.session_id] = min(first2.get(e.session_id, k), k)
    for sid, k2 in first2.items():
        if sid not in last1 or not last1[sid] < k2:
            errors.append(f"session {sid}: phase-2 at {k2} not after phase-1 {last1.get(sid)}")
    asked, left = Counter(), Counter()
    for r in p1:
        asked[(r.session_id, Phase.PHASE1)] += r.rbs_needed
    for r in p2:
        asked[(r.session_id, Phase.PHASE2)] += r.rbs_needed
    for r in left1:
        left[(r.session_id, Phase.PHASE1)] += r.rbs_needed
    for r in left2:
        left[(r.session_id, Phase.PHASE2)] += r.rbs_needed
    for key, n in asked.items():
        if granted[key] + left[key] != n:
            errors.append(f"conservation broken for {key}: {granted[key]}+{left[key]} != {n}")
    if set(granted) - set(asked):
        errors.append("RBs granted to unknown sessions")
    return errors
