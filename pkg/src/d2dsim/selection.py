"""HARQ cost model and per-requester mode / offloader selection."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence


class Mode(str, Enum):
    DIRECT = "direct"
    OFFLOAD = "offload"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class LinkCostInput:
    k_rbs: int
    p_success: float
    c_per_rb: float = 1.0

    def __post_init__(self):
        if self.k_rbs < 1:
            raise ValueError(f"k_rbs must be >= 1, got {self.k_rbs}")
        if not 0 < self.p_success <= 1:
            raise ValueError(f"p_success must be in (0, 1], got {self.p_success}")
        if not self.c_per_rb > 0:
            raise ValueError(f"c_per_rb must be > 0, got {self.c_per_rb}")


@dataclass(frozen=True)
class DirectOption:
    cost: float
    snr_db: float


@dataclass(frozen=True)
class OffloadOption:
    offloader_id: int
    c_ij_cost: float
    c_je_cost: float
    snr_ij_db: float
    snr_je_db: float

    @property
    def cost(self) -> float:
        return self.c_ij_cost + self.c_je_cost


@dataclass(frozen=True)
class PathDecision:
    mode: Mode
    offloader_id: int | None
    total_cost: float
    # x[0] is the direct path, x[1..m] follow the candidate order
    x_vector: tuple[int, ...]


def expected_transmissions(p_success: float) -> float:
    """Mean number of attempts until the first success."""
    if not 0 < p_success <= 1:
        raise ValueError(f"p_success must be in (0, 1], got {p_success}")
    return 1.0 / p_success


def retransmission_factor(p_fail: float, literal: bool = False) -> float:
    """Expected RB transmissions per delivered RB for a link with ``p_fail``.

    ``literal=True`` applies 1/p_fail verbatim (fidelity switch); it is only
    meaningful for comparison runs since it rewards bad links.
    """
    if literal:
        if p_fail <= 0:
            raise ValueError("literal HARQ formula needs p_fail > 0")
        return 1.0 / p_fail
    return expected_transmissions(1.0 - p_fail)


def link_cost(inp: LinkCostInput) -> float:
    return inp.k_rbs * expected_transmissions(inp.p_success) * inp.c_per_rb


def required_rbs(payload_bits: int, bits_per_rb: int) -> int:
    if payload_bits < 0 or bits_per_rb <= 0:
        raise ValueError("payload_bits must be >= 0 and bits_per_rb > 0")
    return -(-payload_bits // bits_per_rb)


def select_path(direct: DirectOption | None, candidates: Sequence[OffloadOption],
                snr_th: float) -> PathDecision:
    """Cheapest SNR-feasible path among the direct link and the offloaders.

    Ties go to the direct path, then to the lowest offloader id.
    """
    m = len(candidates)
    best = None  # (cost, rank, position)
    if direct is not None and direct.snr_db >= snr_th:
        best = (direct.cost, -1, 0)
    for pos, cand in enumerate(candidates):
        if cand.snr_ij_db < snr_th or cand.snr_je_db < snr_th:
            continue
        key = (cand.cost, cand.offloader_id, pos + 1)
        if best is None or key[:2] < best[:2]:
            best = key
    if best is None:
        return PathDecision(Mode.INFEASIBLE, None, 0.0, (0,) * (m + 1))
    cost, rank, pos = best
    x = [0] * (m + 1)
    x[pos] = 1
    if pos == 0:
        return PathDecision(Mode.DIRECT, None, cost, tuple(x))
    return PathDecision(Mode.OFFLOAD, rank, cost, tuple(x))


def objective(x_vector, direct: DirectOption | None, candidates) -> float:
    """Total cost of a Boolean path assignment."""
    total = 0.0
    if x_vector[0]:
        total += direct.cost
    for xi, cand in zip(x_vector[1:], candidates):
        if xi:
            total += cand.cost
    return total


def brute_force_select(direct, candidates, snr_th) -> PathDecision:
    """Exhaustive search over all 2^(m+1) path assignments.

    Kept deliberately naive: it enumerates raw Boolean vectors and checks
    every constraint on each, with no shortcut shared with select_path.
    """
    m = len(candidates)
    best_x, best_cost = None, math.inf
    for x in itertools.product((0, 1), repeat=m + 1):
        if sum(x) > 1:
            continue
        if sum(x) == 0:
            continue  # the all-zero vector means "no path": only the fallback
        if x[0] and (direct is None or direct.snr_db < snr_th):
            continue
        ok = True
        for xi, cand in zip(x[1:], candidates):
            if xi and (cand.snr_ij_db < snr_th or cand.snr_je_db < snr_th):
                ok = False
        if not ok:
            continue
        cost = objective(x, direct, candidates)
        if cost < best_cost or (cost == best_cost and _prefer(x, best_x, candidates)):
            best_x, best_cost = x, cost
    if best_x is None:
        return PathDecision(Mode.INFEASIBLE, None, 0.0, (0,) * (m + 1))
    if best_x[0]:
        return PathDecision(Mode.DIRECT, None, best_cost, best_x)
    j = best_x.index(1) - 1
    return PathDecision(Mode.OFFLOAD, candidates[j].offloader_id, best_cost, best_x)


def _prefer(x, incumbent, candidates) -> bool:
    if incumbent is None:
        return True
    if incumbent[0]:
        return False
    if x[0]:
        return True
    return candidates[x.index(1) - 1].offloader_id < candidates[incumbent.index(1) - 1].offloader_id
