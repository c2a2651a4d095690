"""TDD uplink RB grid, round-robin allocation and two-phase D2D scheduling.

Cells are addressed by ``(subframe, rb_index)`` inside a frame and ordered
globally by the key ``(frame_index, subframe, rb_index)``.  Requests are
filled one RB per turn, scanning free cells in lexicographic order.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Sequence

DEFAULT_TDD = ("D", "S", "U", "U", "U", "U", "D", "S", "U", "U")
UPLINK_SUBFRAMES = 6
RBS_PER_SUBFRAME = 6
SUBFRAME_MS = 1.0
FRAME_MS = 10.0


class InvalidPattern(ValueError):
    pass


class OrphanRelay(ValueError):
    pass


class Leg(str, Enum):
    CELLULAR = "cellular_direct"
    CONTROL = "control"
    D2D_OFFLOAD = "d2d_offload"
    D2D_RELAY = "d2d_relay"


class Phase(int, Enum):
    PHASE1 = 1
    PHASE2 = 2


def phase_of(leg: Leg) -> Phase:
    return Phase.PHASE2 if leg is Leg.D2D_RELAY else Phase.PHASE1


@dataclass(frozen=True)
class AllocationEntry:
    session_id: int
    leg: Leg
    tx_ue: int
    rx_node: int
    phase: Phase


@dataclass(frozen=True)
class ScheduleRequest:
    session_id: int
    tx_ue: int
    rx_node: int
    leg: Leg
    rbs_needed: int
    not_before: tuple[int, int] | None = None  # (frame, subframe)

    def __post_init__(self):
        if self.rbs_needed < 1:
            raise ValueError(f"rbs_needed must be >= 1, got {self.rbs_needed}")


@dataclass
class FrameGrid:
    frame_index: int
    subframes: tuple[str, ...] = DEFAULT_TDD
    rbs_per_subframe: int = RBS_PER_SUBFRAME
    allocations: dict = field(default_factory=dict)
    # allocation order, needed for fairness/ordering checks
    log: list = field(default_factory=list)

    @property
    def uplink_subframes(self) -> tuple[int, ...]:
        return tuple(i for i, tag in enumerate(self.subframes) if tag == "U")

    def cells(self):
        for sf in self.uplink_subframes:
            for rb in range(self.rbs_per_subframe):
                yield sf, rb

    @property
    def capacity(self) -> int:
        return len(self.uplink_subframes) * self.rbs_per_subframe

    def free_count(self) -> int:
        return self.capacity - len(self.allocations)

    def key(self, subframe: int) -> tuple[int, int]:
        return (self.frame_index, subframe)

    def assign(self, cell, entry: AllocationEntry) -> None:
        if cell in self.allocations:
            raise RuntimeError(f"cell {cell} of frame {self.frame_index} double-booked")
        self.allocations[cell] = entry
        self.log.append((cell, entry))


def build_frame(frame_index: int, tdd_pattern: Sequence[str] = DEFAULT_TDD) -> FrameGrid:
    pattern = tuple(str(t).upper() for t in tdd_pattern)
    if len(pattern) != 10 or any(t not in "UDS" for t in pattern):
        raise InvalidPattern(f"TDD pattern must be 10 subframes of U/D/S, got {pattern}")
    n_up = pattern.count("U")
    if n_up != UPLINK_SUBFRAMES:
        raise InvalidPattern(f"TDD pattern needs {UPLINK_SUBFRAMES} uplink subframes, got {n_up}")
    return FrameGrid(frame_index, pattern)


def round_robin_schedule(requests: Sequence[ScheduleRequest], grid: FrameGrid):
    """Grant one RB per request per turn until demand or grid runs out.

    Requests are served in the order given.  Returns ``(grid, leftover)``
    where ``leftover`` holds the unfilled remainder of each request.
    """
    remaining = [r.rbs_needed for r in requests]
    free = [c for c in grid.cells() if c not in grid.allocations]
    # per-request scan pointer into ``free``; cells before not_before are skipped
    ptr = []
    for r in requests:
        p = 0
        if r.not_before is not None:
            while p < len(free) and grid.key(free[p][0]) < r.not_before:
                p += 1
        ptr.append(p)
    taken = set()

    progress = True
    while progress:
        progress = False
        for i, req in enumerate(requests):
            if remaining[i] == 0:
                continue
            p = ptr[i]
            while p < len(free) and free[p] in taken:
                p += 1
            ptr[i] = p
            if p == len(free):
                continue
            cell = free[p]
            taken.add(cell)
            grid.assign(cell, AllocationEntry(req.session_id, req.leg, req.tx_ue,
                                              req.rx_node, phase_of(req.leg)))
            remaining[i] -= 1
            progress = True

    leftover = [replace(r, rbs_needed=n) for r, n in zip(requests, remaining) if n > 0]
    return grid, leftover


def _after(key: tuple[int, int], grid_pattern=DEFAULT_TDD) -> tuple[int, int]:
    """Ordering key of the first subframe strictly after ``key``."""
    frame, sf = key
    return (frame, sf + 1) if sf + 1 < len(grid_pattern) else (frame + 1, 0)


def two_phase_schedule(phase1: Sequence[ScheduleRequest], phase2: Sequence[ScheduleRequest],
                       frames: Iterable[FrameGrid], phase1_done=None):
    """Schedule Phase-1 (cellular, control, UE->UE) before Phase-2 (relay) RBs.

    A relay request becomes eligible only once its session has no Phase-1
    demand left, and then only in subframes strictly after that session's
    last Phase-1 RB.  ``phase1_done`` maps session ids whose Phase-1 legs
    finished earlier to the ordering key of their last Phase-1 RB.

    Consumes grids from ``frames`` until every request is filled or the
    stream ends.  Returns ``(grids, leftover_phase1, leftover_phase2)``.
    """
    last_p1 = dict(phase1_done or {})
    p1_sessions = {r.session_id for r in phase1}
    for r in phase2:
        if r.leg is not Leg.D2D_RELAY:
            raise ValueError(f"phase-2 request for session {r.session_id} has leg {r.leg}")
        if r.session_id not in p1_sessions and r.session_id not in last_p1:
            raise OrphanRelay(f"relay for session {r.session_id} has no phase-1 counterpart")
    for r in phase1:
        if r.leg is Leg.D2D_RELAY:
            raise ValueError(f"relay request for session {r.session_id} submitted as phase 1")

    rank = {r.session_id: i for i, r in enumerate(phase2)}
    pending1 = list(phase1)
    pending2 = list(phase2)
    used = []
    for grid in frames:
        if not pending1 and not pending2:
            break
        before = len(grid.log)
        grid, pending1 = round_robin_schedule(pending1, grid)
        for cell, entry in grid.log[before:]:
            k = grid.key(cell[0])
            if k > last_p1.get(entry.session_id, (-1, -1)):
                last_p1[entry.session_id] = k

        waiting = {r.session_id for r in pending1}
        eligible, blocked = [], []
        for r in pending2:
            if r.session_id in waiting:
                blocked.append(r)
                continue
            nb = _after(last_p1[r.session_id], grid.subframes)
            if r.not_before is not None:
                nb = max(nb, r.not_before)
            eligible.append(replace(r, not_before=nb))
        grid, left2 = round_robin_schedule(eligible, grid)
        pending2 = blocked + left2
        pending2.sort(key=lambda r: rank[r.session_id])
        used.append(grid)
    return used, pending1, pending2
