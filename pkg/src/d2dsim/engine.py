"""Session-level simulation of the offloading protocol over the TDD frame stream.

One run = one traffic epoch: every active UE queues its payload at t = 0 and
the run advances frame by frame until each session is Done or Failed.
Stage transitions (control -> UE->UE leg -> relay leg) take effect at the
next frame boundary, once HARQ feedback for the frame is known.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, fields
from enum import Enum

import numpy as np
from scipy import stats

from .channel import (ENB, ChannelParams, FailModel, LinkEvaluator, PowerInfeasible,
                      d2d_power_level, required_tx_power)
from .netmodel import UserType, classify_users, neighbors_within, place_ues
from .scheduler import (DEFAULT_TDD, FRAME_MS, AllocationEntry, Leg, Phase, ScheduleRequest,
                        build_frame, two_phase_schedule)
from .selection import (DirectOption, Mode, OffloadOption, PathDecision, required_rbs,
                        retransmission_factor, select_path)


class Scenario(str, Enum):
    CELLULAR_ONLY = "cellular"
    CELLULAR_WITH_D2D = "d2d"


class SessionPhase(str, Enum):
    INITIATION = "initiation"
    DISCOVERY = "discovery"
    HANDSHAKING = "handshaking"
    SCHEDULING = "scheduling"
    COMMUNICATION = "communication"
    DONE = "done"
    FAILED = "failed"


_ALLOWED = {
    SessionPhase.INITIATION: {SessionPhase.DISCOVERY, SessionPhase.SCHEDULING},
    SessionPhase.DISCOVERY: {SessionPhase.HANDSHAKING, SessionPhase.SCHEDULING,
                             SessionPhase.FAILED},
    SessionPhase.HANDSHAKING: {SessionPhase.SCHEDULING},
    SessionPhase.SCHEDULING: {SessionPhase.COMMUNICATION},
    SessionPhase.COMMUNICATION: {SessionPhase.DONE, SessionPhase.FAILED},
    SessionPhase.DONE: set(),
    SessionPhase.FAILED: set(),
}


class ConfigInvalid(ValueError):
    pass


class InsufficientRuns(ValueError):
    pass


@dataclass(frozen=True)
class OverheadParams:
    discovery_rbs: int = 2
    handshake_rbs: int = 2
    control_pt_dbm: float | None = None  # None -> UE maximum power
    include_control_in_delay: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: Scenario = Scenario.CELLULAR_WITH_D2D
    n_total: int = 100
    n_active: int = 50
    type2_fraction: float = 0.4
    cell_radius_m: float = 150.0
    channel: ChannelParams = ChannelParams()
    snr_th_db: float = 10.0
    d2d_radius_m: float = 20.0
    power_levels_dbm: tuple[float, ...] = (-5.0, 5.0, 15.0)
    fail_model: FailModel = FailModel()
    c_per_rb: float = 1.0
    overhead: OverheadParams = OverheadParams()
    # 16-QAM (4 bit/symbol) x 12 subcarriers x 14 symbols
    bits_per_rb: int = 672
    demand_rbs: tuple[int, int] = (1, 10)
    type2_loss_db: tuple[float, float] = (20.0, 40.0)
    max_harq_attempts: int = 8
    harq_literal_paper_formula: bool = False
    tdd_pattern: tuple[str, ...] = DEFAULT_TDD
    tti_s: float = 1e-3
    max_frames: int = 100_000
    seeds: tuple[int, ...] = tuple(range(100))

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        object.__setattr__(self, "power_levels_dbm",
                           tuple(float(x) for x in self.power_levels_dbm))
        object.__setattr__(self, "tdd_pattern", tuple(self.tdd_pattern))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    def problems(self) -> list[str]:
        """Every violated invariant, empty when the config is usable."""
        out = []
        if self.n_total < 0:
            out.append("n_total must be >= 0")
        if not 0 <= self.n_active <= self.n_total:
            out.append(f"n_active={self.n_active} must lie in [0, n_total={self.n_total}]")
        if not 0 <= self.type2_fraction <= 1:
            out.append("type2_fraction must lie in [0, 1]")
        if not self.cell_radius_m > 0:
            out.append("cell_radius_m must be > 0")
        if not self.d2d_radius_m >= 0:
            out.append("d2d_radius_m must be >= 0")
        if not self.power_levels_dbm:
            out.append("power_levels_dbm must not be empty")
        elif list(self.power_levels_dbm) != sorted(self.power_levels_dbm):
            out.append("power_levels_dbm must be ascending")
        if not self.c_per_rb > 0:
            out.append("c_per_rb must be > 0")
        if self.bits_per_rb <= 0:
            out.append("bits_per_rb must be > 0")
        lo, hi = self.demand_rbs
        if not 1 <= lo <= hi:
            out.append("demand_rbs must satisfy 1 <= low <= high")
        lo, hi = self.type2_loss_db
        if not 0 <= lo <= hi:
            out.append("type2_loss_db must satisfy 0 <= low <= high")
        if self.max_harq_attempts < 1:
            out.append("max_harq_attempts must be >= 1")
        if self.overhead.discovery_rbs < 0 or self.overhead.handshake_rbs < 0:
            out.append("control overhead RB counts must be >= 0")
        if self.tdd_pattern.count("U") != 6 or len(self.tdd_pattern) != 10:
            out.append("tdd_pattern must have 10 subframes with exactly 6 uplink")
        if not self.tti_s > 0:
            out.append("tti_s must be > 0")
        if not self.seeds:
            out.append("seeds must not be empty")
        return out

    def validate(self) -> None:
        errs = self.problems()
        if errs:
            raise ConfigInvalid("invalid scenario config: " + "; ".join(errs))


@dataclass
class _Rb:
    """One resource block of payload or signalling waiting to get through."""
    leg: Leg
    tx: int
    rx: int
    pt_dbm: float
    harq: bool = True
    attempts: int = 0


@dataclass
class SessionState:
    session_id: int
    requester: int
    phase: SessionPhase = SessionPhase.INITIATION
    decision: PathDecision | None = None
    rbs_consumed: int = 0
    control_rbs_consumed: int = 0
    first_request_time: float = 0.0
    completion_time: float | None = None
    data_start_time: float = 0.0
    energy_j: float = 0.0
    k_rbs: int = 0
    rbs_dropped: int = 0
    history: list = field(default_factory=list)
    # Phase-1 queue (control + cellular or UE->UE RBs), then the relay queue
    queue: list = field(default_factory=list, repr=False)
    relay: list | None = field(default=None, repr=False)
    relay_ready_frame: int = 0
    offload_delivered: int = 0

    def advance(self, new: SessionPhase) -> None:
        if new not in _ALLOWED[self.phase]:
            raise RuntimeError(f"session {self.session_id}: illegal {self.phase} -> {new}")
        self.history.append(self.phase)
        self.phase = new

    @property
    def terminal(self) -> bool:
        return self.phase in (SessionPhase.DONE, SessionPhase.FAILED)

    def delay_ms(self, include_control=True) -> float:
        start = self.first_request_time if include_control else self.data_start_time
        return self.completion_time - start


@dataclass(frozen=True)
class ScenarioMetrics:
    scenario: str
    seed: int
    n_active: int
    total_rbs: int
    control_rbs: int
    avg_rbs_per_user: float
    avg_rbs_per_frame: float
    frames_used: int
    avg_delay_per_user_ms: float
    total_energy_j: float
    sessions_completed: int
    sessions_failed: int
    n_type2: int
    n_offloaded: int
    per_user_delay_ms: tuple[float, ...] = ()
    per_user_rbs: tuple[int, ...] = ()

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# metric name used in outputs -> ScenarioMetrics attribute
FIGURE_METRICS = {
    "rb": "total_rbs",
    "delay": "avg_delay_per_user_ms",
    "energy": "total_energy_j",
}


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def energy_consumed(rb_transmissions, pt_dbm, tti_s=1e-3, control_overhead_rbs=0,
                    control_pt_dbm=23.0) -> float:
    """Radiated energy in joules for data plus control RB transmissions."""
    if rb_transmissions < 0 or control_overhead_rbs < 0:
        raise ValueError("RB counts must be non-negative")
    data = rb_transmissions * dbm_to_mw(pt_dbm) / 1000.0 * tti_s
    ctrl = control_overhead_rbs * dbm_to_mw(control_pt_dbm) / 1000.0 * tti_s
    return data + ctrl


def transmit_with_harq(k_rbs: int, p_fail: float, max_attempts: int | None, rng):
    """Send ``k_rbs`` RBs with per-attempt failure probability ``p_fail``.

    Each RB is retried until it gets through or ``max_attempts`` is used up
    (``None`` = no cap).  Returns ``(rb_transmissions, success)``.
    """
    if k_rbs < 1 or not 0 <= p_fail < 1:
        raise ValueError("need k_rbs >= 1 and 0 <= p_fail < 1")
    needed = rng.geometric(1.0 - p_fail, size=k_rbs)
    if max_attempts is None:
        return int(needed.sum()), True
    used = np.minimum(needed, max_attempts)
    return int(used.sum()), bool((needed <= max_attempts).all())


@dataclass
class World:
    config: ScenarioConfig
    topology: object
    links: LinkEvaluator
    rng: np.random.Generator


def build_world(config: ScenarioConfig, seed: int) -> World:
    config.validate()
    fail = config.fail_model.resolved(config.snr_th_db)
    links = LinkEvaluator(config.channel, fail, config.snr_th_db, seed)
    topo = place_ues(config.n_total, config.n_active, config.type2_fraction,
                     config.cell_radius_m, np.random.default_rng((seed, 0x70B0)),
                     type2_loss_range=config.type2_loss_db, demand_rbs=config.demand_rbs,
                     bits_per_rb=config.bits_per_rb)
    snr_table = {}
    for uid in topo.active_ids():
        ue = topo.ues[uid]
        prof = links.profile(uid, ENB, topo.distance(uid, ENB), ue.location_loss_db)
        snr_table[uid] = prof.snr_db
    topo = classify_users(topo, snr_table, config.snr_th_db)
    return World(config, topo, links, np.random.default_rng((seed, 0x4A2)))


def _direct_profile(world, uid, frame):
    ue = world.topology.ues[uid]
    return world.links.profile(uid, ENB, world.topology.distance(uid, ENB),
                               ue.location_loss_db, frame)


def discover(world: World, session: SessionState, reserved=frozenset()):
    """Evaluate the direct path and every free offloader candidate at frame 0.

    Returns the path decision and the D2D power level picked for each
    feasible candidate.
    """
    cfg = world.config
    topo = world.topology
    uid = session.requester
    k = session.k_rbs
    literal = cfg.harq_literal_paper_formula
    direct = _direct_profile(world, uid, None)
    direct_opt = DirectOption(k * retransmission_factor(direct.p_fail, literal) * cfg.c_per_rb,
                              direct.snr_db)
    options, levels = [], {}
    for j in neighbors_within(topo, uid, cfg.d2d_radius_m).candidate_ids:
        if j in reserved:
            continue
        d_ij = topo.distance(uid, j)
        loss = world.links.loss(uid, j, d_ij, 0.0)
        need = required_tx_power(cfg.snr_th_db, cfg.channel.noise_power_dbm, loss)
        try:
            level = d2d_power_level(need, cfg.power_levels_dbm).level_dbm
        except PowerInfeasible:
            continue
        ij = world.links.profile(uid, j, d_ij, 0.0, pt_dbm=level)
        je = world.links.profile(j, ENB, topo.distance(j, ENB), 0.0)
        options.append(OffloadOption(
            j,
            k * retransmission_factor(ij.p_fail, literal) * cfg.c_per_rb,
            k * retransmission_factor(je.p_fail, literal) * cfg.c_per_rb,
            ij.snr_db, je.snr_db))
        levels[j] = level
    return select_path(direct_opt, options, cfg.snr_th_db), levels


def _plan_sessions(world: World) -> list[SessionState]:
    cfg = world.config
    topo = world.topology
    pt_max = cfg.channel.pt_max_dbm
    ctrl_pt = pt_max if cfg.overhead.control_pt_dbm is None else cfg.overhead.control_pt_dbm
    sessions = []
    for sid, uid in enumerate(topo.active_ids()):
        ue = topo.ues[uid]
        s = SessionState(sid, uid, k_rbs=required_rbs(ue.payload_bits, cfg.bits_per_rb))
        direct = [_Rb(Leg.CELLULAR, uid, ENB, pt_max) for _ in range(s.k_rbs)]
        if cfg.scenario is Scenario.CELLULAR_ONLY or ue.user_type is UserType.TYPE1:
            s.decision = PathDecision(Mode.DIRECT, None, 0.0, (1,))
            s.advance(SessionPhase.SCHEDULING)
            s.queue = direct
        else:
            # the eNB evaluates offloaders from the SR report alone and only
            # signals the UE once an offloader has been found
            s.advance(SessionPhase.DISCOVERY)
            s.decision, levels = discover(world, s)
            if s.decision.mode is Mode.OFFLOAD:
                j = s.decision.offloader_id
                s.advance(SessionPhase.HANDSHAKING)
                n_ctrl = cfg.overhead.discovery_rbs + cfg.overhead.handshake_rbs
                s.queue = ([_Rb(Leg.CONTROL, uid, ENB, ctrl_pt, harq=False)
                            for _ in range(n_ctrl)]
                           + [_Rb(Leg.D2D_OFFLOAD, uid, j, levels[j]) for _ in range(s.k_rbs)])
                s.relay = []
            else:
                # no feasible offloader: fall back to the poor direct link
                s.queue = direct
            s.advance(SessionPhase.SCHEDULING)
        sessions.append(s)
    return sessions


def _p_fail(world, rb: _Rb, frame: int) -> float:
    topo = world.topology
    la = topo.ues[rb.tx].location_loss_db if rb.rx == ENB else 0.0
    prof = world.links.profile(rb.tx, rb.rx, topo.distance(rb.tx, rb.rx), la, frame,
                               pt_dbm=rb.pt_dbm)
    return prof.p_fail


def run_sessions(world: World, keep_grids: bool = False):
    """Drive all sessions to a terminal state; returns ``(sessions, grids)``.

    Each frame, sessions are offered to the scheduler in round-robin order
    continuing after the last Phase-1 grant of the previous frame.  Cells a
    session receives are mapped onto its queue head-first in time order, so
    control RBs always precede payload RBs and a failed RB is retried before
    fresh ones.  The relay queue opens at the frame after the UE->UE leg
    settles, sized to the RBs the offloader actually received.
    """
    cfg = world.config
    sessions = _plan_sessions(world)
    by_id = {s.session_id: s for s in sessions}
    n_sess = max(len(sessions), 1)
    grids = []
    rr_start = 0
    last_p1: dict[int, tuple[int, int]] = {}
    frame = 0
    live = sessions[:]
    while live:
        if frame >= cfg.max_frames:
            raise RuntimeError(f"run exceeded {cfg.max_frames} frames")
        # an offloader works for one session per frame, lowest session id first
        busy: set[int] = set()
        quota = {}
        for s in live:
            j = s.decision.offloader_id
            if s.relay is None or not (s.queue or s.relay):
                continue
            if j in busy:
                # leading control RBs do not need the offloader
                quota[s.session_id] = sum(1 for _ in itertools.takewhile(
                    lambda rb: rb.leg is Leg.CONTROL, s.queue))
            elif s.queue or s.relay_ready_frame <= frame:
                busy.add(j)

        order = sorted(live, key=lambda s: (s.session_id - rr_start) % n_sess)
        p1, p2 = [], []
        for s in order:
            n_q = quota.get(s.session_id)
            if n_q == 0:
                continue
            if s.queue:
                head = s.queue[0]
                p1.append(ScheduleRequest(s.session_id, head.tx, head.rx, head.leg,
                                          n_q or len(s.queue)))
            elif s.relay and s.relay_ready_frame <= frame:
                head = s.relay[0]
                p2.append(ScheduleRequest(s.session_id, head.tx, head.rx, head.leg,
                                          len(s.relay)))
        grid = build_frame(frame, cfg.tdd_pattern)
        (grid,), _, _ = two_phase_schedule(p1, p2, [grid], last_p1)

        slot: dict[int, int] = {}
        p_cache = {}
        for cell in sorted(grid.allocations):
            entry = grid.allocations[cell]
            s = by_id[entry.session_id]
            queue = s.queue if s.queue else s.relay
            i = slot.get(s.session_id, 0)
            slot[s.session_id] = i + 1
            rb = queue[i]
            if rb.leg is not entry.leg:
                grid.allocations[cell] = AllocationEntry(s.session_id, rb.leg, rb.tx, rb.rx,
                                                         entry.phase)
            if s.phase is SessionPhase.SCHEDULING and rb.leg is not Leg.CONTROL:
                s.advance(SessionPhase.COMMUNICATION)
            s.energy_j += energy_consumed(1, rb.pt_dbm, cfg.tti_s)
            s.completion_time = frame * FRAME_MS + cell[0] + 1.0
            if rb.leg is Leg.CONTROL:
                s.control_rbs_consumed += 1
                s.data_start_time = s.completion_time
            else:
                s.rbs_consumed += 1
            if rb.leg is not Leg.D2D_RELAY:
                last_p1[s.session_id] = (frame, cell[0])
            if not rb.harq:
                queue[i] = None
                continue
            key = (rb.tx, rb.rx, rb.pt_dbm)
            if key not in p_cache:
                p_cache[key] = _p_fail(world, rb, frame)
            rb.attempts += 1
            if world.rng.random() >= p_cache[key]:
                queue[i] = None
                if rb.leg is Leg.D2D_OFFLOAD:
                    s.offload_delivered += 1
            elif rb.attempts >= cfg.max_harq_attempts:
                queue[i] = None
                s.rbs_dropped += 1

        grid.log = [(cell, grid.allocations[cell]) for cell, _ in grid.log]
        for _, entry in reversed(grid.log):
            if entry.phase is Phase.PHASE1:
                rr_start = entry.session_id + 1
                break

        for sid in slot:
            s = by_id[sid]
            if s.queue:
                s.queue = [rb for rb in s.queue if rb is not None]
                if not s.queue and s.relay is not None:
                    s.relay = [_Rb(Leg.D2D_RELAY, s.decision.offloader_id, ENB,
                                   cfg.channel.pt_max_dbm)
                               for _ in range(s.offload_delivered)]
                    s.relay_ready_frame = frame + 1
            else:
                s.relay = [rb for rb in s.relay if rb is not None]
            if s.queue or s.relay:
                continue
            if s.phase is SessionPhase.SCHEDULING:
                s.advance(SessionPhase.COMMUNICATION)
            s.advance(SessionPhase.FAILED if s.rbs_dropped else SessionPhase.DONE)
        if keep_grids:
            grids.append(grid)
        live = [s for s in live if not s.terminal]
        frame += 1
    return sessions, grids


def simulate_scenario(config: ScenarioConfig, seed: int, keep_grids: bool = False):
    """Run one seed of one scenario.  With ``keep_grids`` also returns the
    sessions and frame grids for inspection."""
    world = build_world(config, seed)
    sessions, grids = run_sessions(world, keep_grids=keep_grids)
    incl = config.overhead.include_control_in_delay
    delays = tuple(s.delay_ms(incl) for s in sessions)
    per_rbs = tuple(s.rbs_consumed + s.control_rbs_consumed for s in sessions)
    total = sum(per_rbs)
    frames_used = 0
    if sessions:
        frames_used = int(math.ceil(max(s.completion_time for s in sessions) / FRAME_MS))
    n = len(sessions)
    metrics = ScenarioMetrics(
        scenario=config.scenario.value,
        seed=seed,
        n_active=n,
        total_rbs=total,
        control_rbs=sum(s.control_rbs_consumed for s in sessions),
        avg_rbs_per_user=total / n if n else 0.0,
        avg_rbs_per_frame=total / frames_used if frames_used else 0.0,
        frames_used=frames_used,
        avg_delay_per_user_ms=sum(delays) / n if n else 0.0,
        total_energy_j=math.fsum(s.energy_j for s in sessions),
        sessions_completed=sum(s.phase is SessionPhase.DONE for s in sessions),
        sessions_failed=sum(s.phase is SessionPhase.FAILED for s in sessions),
        n_type2=sum(world.topology.ues[s.requester].user_type is UserType.TYPE2
                    for s in sessions),
        n_offloaded=sum(s.decision.mode is Mode.OFFLOAD for s in sessions),
        per_user_delay_ms=delays,
        per_user_rbs=per_rbs,
    )
    if keep_grids:
        return metrics, sessions, grids, world
    return metrics


@dataclass(frozen=True)
class Interval:
    mean: float
    half_width: float
    n: int
    rel_half_width: float
    meets_target: bool


def t_interval(values, confidence_level=0.95, rel_target=0.02) -> Interval:
    x = np.asarray(values, dtype=float)
    n = x.size
    if n < 2:
        raise InsufficientRuns(f"need at least 2 runs, got {n}")
    mean = float(x.mean())
    sd = float(x.std(ddof=1))
    hw = float(stats.t.ppf(0.5 + confidence_level / 2, n - 1) * sd / math.sqrt(n))
    if mean != 0:
        rel = abs(hw / mean)
    else:
        rel = 0.0 if hw == 0 else math.inf
    return Interval(mean, hw, n, rel, rel <= rel_target)


def aggregate_runs(per_seed, confidence_level=0.95, rel_target=0.02,
                   metrics=FIGURE_METRICS) -> dict[str, Interval]:
    """Mean and t-based confidence half-width for each figure metric."""
    if len(per_seed) < 2:
        raise InsufficientRuns(f"need at least 2 runs, got {len(per_seed)}")
    return {name: t_interval([getattr(m, attr) for m in per_seed], confidence_level,
                             rel_target)
            for name, attr in metrics.items()}
