"""Cell geometry, UE population and offloader candidate discovery."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np


class Activity(str, Enum):
    ACTIVE = "active"
    IDLE = "idle"


class UserType(str, Enum):
    TYPE1 = "type1"
    TYPE2 = "type2"
    UNCLASSIFIED = "unclassified"


class NotType2Error(ValueError):
    pass


class MissingLinkEntry(KeyError):
    pass


@dataclass(frozen=True)
class UeRecord:
    id: int
    position: tuple[float, float]
    activity: Activity
    user_type: UserType = UserType.UNCLASSIFIED
    payload_bits: int = 0
    location_loss_db: float = 0.0

    @property
    def is_active(self) -> bool:
        return self.activity is Activity.ACTIVE


@dataclass(frozen=True)
class Topology:
    cell_radius: float
    enb_position: tuple[float, float]
    ues: tuple[UeRecord, ...]

    def distance(self, a: int, b: int) -> float:
        """Distance between two UEs, or UE and eNB when ``b`` is negative."""
        pa = self.ues[a].position
        pb = self.enb_position if b < 0 else self.ues[b].position
        return math.hypot(pa[0] - pb[0], pa[1] - pb[1])

    def active_ids(self) -> list[int]:
        return [u.id for u in self.ues if u.is_active]

    def check(self) -> None:
        """Raise AssertionError if a structural invariant is broken."""
        ex, ey = self.enb_position
        for idx, ue in enumerate(self.ues):
            assert ue.id == idx, f"UE ids not dense at {idx}"
            d = math.hypot(ue.position[0] - ex, ue.position[1] - ey)
            assert d <= self.cell_radius * (1 + 1e-12), f"UE {idx} outside cell"
            assert (ue.payload_bits > 0) == ue.is_active, f"UE {idx} payload/activity"
            assert ue.location_loss_db >= 0
            if not ue.is_active:
                assert ue.user_type is UserType.UNCLASSIFIED


@dataclass(frozen=True)
class CandidateSet:
    requester_id: int
    candidate_ids: tuple[int, ...]


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def place_ues(n_total, n_active, type2_fraction, cell_radius, rng,
              type2_loss_range=(20.0, 40.0), demand_rbs=(1, 10), bits_per_rb=672,
              enb_position=(0.0, 0.0)) -> Topology:
    """Drop ``n_total`` static UEs uniformly over the cell disk.

    The first ``n_active`` draws of a random permutation become active
    transmitters, and the first ``round(type2_fraction * n_active)`` of those
    get an extra location loss so their direct link is poor.
    """
    if n_total < 0 or n_active < 0 or n_active > n_total:
        raise ValueError(f"need 0 <= n_active <= n_total, got {n_active}, {n_total}")
    if not 0 <= type2_fraction <= 1:
        raise ValueError(f"type2_fraction must be in [0, 1], got {type2_fraction}")
    if not cell_radius > 0:
        raise ValueError(f"cell_radius must be positive, got {cell_radius}")
    lo_rb, hi_rb = demand_rbs
    if not 1 <= lo_rb <= hi_rb:
        raise ValueError(f"bad demand range {demand_rbs}")

    # sqrt of a uniform radius fraction gives uniform density over the disk
    r = cell_radius * np.sqrt(rng.random(n_total))
    theta = rng.uniform(0.0, 2 * math.pi, n_total)
    order = rng.permutation(n_total)
    active = order[:n_active]
    n_type2 = round_half_up(type2_fraction * n_active)
    poor = set(active[:n_type2].tolist())
    demand = rng.integers(lo_rb, hi_rb, endpoint=True, size=n_total)
    extra = rng.uniform(type2_loss_range[0], type2_loss_range[1], n_total)

    active_set = set(active.tolist())
    ex, ey = enb_position
    ues = []
    for i in range(n_total):
        is_active = i in active_set
        ues.append(UeRecord(
            id=i,
            position=(ex + float(r[i] * math.cos(theta[i])),
                      ey + float(r[i] * math.sin(theta[i]))),
            activity=Activity.ACTIVE if is_active else Activity.IDLE,
            payload_bits=int(demand[i]) * bits_per_rb if is_active else 0,
            location_loss_db=float(extra[i]) if i in poor else 0.0,
        ))
    return Topology(float(cell_radius), (float(ex), float(ey)), tuple(ues))


def classify_users(topology: Topology, link_table, snr_th: float) -> Topology:
    """Split active UEs into Type-1 (SNR strictly above threshold) and Type-2."""
    ues = []
    for ue in topology.ues:
        if ue.is_active:
            if ue.id not in link_table:
                raise MissingLinkEntry(f"no direct-link SNR for active UE {ue.id}")
            kind = UserType.TYPE1 if link_table[ue.id] > snr_th else UserType.TYPE2
            ues.append(replace(ue, user_type=kind))
        else:
            ues.append(ue)
    return replace(topology, ues=tuple(ues))


def neighbors_within(topology: Topology, requester_id: int, d2d_radius: float) -> CandidateSet:
    req = topology.ues[requester_id]
    if not (req.is_active and req.user_type is UserType.TYPE2):
        raise NotType2Error(f"UE {requester_id} is not a Type-2 active transmitter")
    found = [ue.id for ue in topology.ues
             if ue.activity is Activity.IDLE and ue.id != requester_id
             and topology.distance(requester_id, ue.id) <= d2d_radius]
    return CandidateSet(requester_id, tuple(sorted(found)))
