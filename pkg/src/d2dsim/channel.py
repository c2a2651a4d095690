"""Radio channel: path loss, received power, SNR, RB failure probability and
the discrete D2D transmit power ladder.

All power quantities are handled in the log domain (dB / dBm).
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

ENB = -1  # node id of the base station in link tables


class LossModel(str, Enum):
    PAPER_LITERAL = "paper_literal"
    LOG_DISTANCE = "log_distance"


class PowerInfeasible(ValueError):
    """Required D2D transmit power exceeds the highest configured level."""


@dataclass(frozen=True)
class ChannelParams:
    gamma: float = 3.0
    freq_mhz: float = 2300.0
    shadow_sigma_db: float = 6.0
    # kTB over one 180 kHz resource block
    noise_power_dbm: float = -121.4
    pt_max_dbm: float = 23.0
    loss_model: LossModel = LossModel.LOG_DISTANCE
    rayleigh: bool = True
    # static UEs keep their shadowing; True redraws it every frame like fading
    shadowing_per_frame: bool = False

    def __post_init__(self):
        object.__setattr__(self, "loss_model", LossModel(self.loss_model))
        errors = []
        if not self.gamma > 0:
            errors.append(f"gamma must be > 0, got {self.gamma}")
        if not self.shadow_sigma_db >= 0:
            errors.append(f"shadow_sigma_db must be >= 0, got {self.shadow_sigma_db}")
        if not self.freq_mhz > 0:
            errors.append(f"freq_mhz must be > 0, got {self.freq_mhz}")
        if errors:
            raise ValueError("; ".join(errors))


@dataclass(frozen=True)
class FailModel:
    """Logistic SNR -> per-RB failure probability mapping.

    ``midpoint_db=None`` means "use the SNR threshold of the scenario".
    A ``table`` of (snr_db, p_fail) breakpoints overrides the logistic curve
    and is interpolated linearly (clamped at both ends).
    """

    p_floor: float = 0.01
    p_ceil: float = 0.9
    slope: float = 0.8
    midpoint_db: float | None = None
    table: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        errors = []
        if not 0 <= self.p_floor <= self.p_ceil < 1:
            errors.append(
                f"need 0 <= p_floor <= p_ceil < 1, got {self.p_floor}, {self.p_ceil}")
        if self.slope < 0:
            errors.append(f"slope must be >= 0, got {self.slope}")
        if self.table is not None:
            tbl = tuple((float(s), float(p)) for s, p in self.table)
            object.__setattr__(self, "table", tbl)
            snrs = [s for s, _ in tbl]
            probs = [p for _, p in tbl]
            if not tbl:
                errors.append("fail table must not be empty")
            elif snrs != sorted(snrs):
                errors.append("fail table SNRs must be ascending")
            elif any(b > a for a, b in zip(probs, probs[1:])):
                errors.append("fail table probabilities must be non-increasing")
            elif not all(0 <= p < 1 for p in probs):
                errors.append("fail table probabilities must lie in [0, 1)")
        if errors:
            raise ValueError("; ".join(errors))

    def resolved(self, snr_th_db: float) -> "FailModel":
        if self.midpoint_db is not None:
            return self
        return FailModel(self.p_floor, self.p_ceil, self.slope, snr_th_db, self.table)


@dataclass(frozen=True)
class LinkProfile:
    src: int
    dst: int
    distance_m: float
    loss_db: float
    pt_dbm: float
    snr_db: float
    p_fail: float


@dataclass(frozen=True)
class PowerLevel:
    level_dbm: float


def draw_shadowing(sigma_db, rng, size=None):
    """Log-normal shadowing term in dB, zero mean."""
    if sigma_db == 0:
        return 0.0 if size is None else np.zeros(size)
    return rng.normal(0.0, sigma_db, size)


def draw_rayleigh_loss(rng, size=None):
    """Flat Rayleigh fade as a loss in dB (unit-mean exponential power gain)."""
    gain = rng.exponential(1.0, size)
    return -10.0 * np.log10(gain)


def deterministic_loss(distance_m, params: ChannelParams):
    if params.loss_model is LossModel.PAPER_LITERAL:
        return params.gamma * math.log10(distance_m + params.freq_mhz)
    return (10.0 * params.gamma * math.log10(max(distance_m, 1.0))
            + 20.0 * math.log10(params.freq_mhz))


def path_loss(distance_m: float, params: ChannelParams, location_loss_db: float = 0.0,
              rng: np.random.Generator | None = None) -> float:
    """Total link loss in dB including shadowing, fading and location loss.

    The random terms are drawn from ``rng`` in a fixed order (shadowing first,
    then fading) so a generator seeded per link and frame reproduces the
    same realisation.  Without ``rng`` both random terms are zero.
    """
    if distance_m < 0:
        raise ValueError(f"distance must be non-negative, got {distance_m}")
    loss = deterministic_loss(distance_m, params) + location_loss_db
    if rng is not None:
        loss += float(draw_shadowing(params.shadow_sigma_db, rng))
        if params.rayleigh:
            loss += float(draw_rayleigh_loss(rng))
    return loss


def received_power(pt_dbm: float, loss_db: float) -> float:
    return pt_dbm - loss_db


def snr_db(pr_dbm: float, noise_dbm: float) -> float:
    return pr_dbm - noise_dbm


def required_tx_power(snr_th_db: float, noise_dbm: float, loss_db: float) -> float:
    """Minimum transmit power (dBm) that lifts the link to ``snr_th_db``."""
    return snr_th_db + noise_dbm + loss_db


def d2d_power_level(required_dbm: float, levels=(-5.0, 5.0, 15.0)) -> PowerLevel:
    """Smallest configured level at or above ``required_dbm``."""
    if not levels:
        raise ValueError("power level set is empty")
    levels = list(levels)
    if levels != sorted(levels):
        raise ValueError("power levels must be sorted ascending")
    idx = bisect.bisect_left(levels, required_dbm)
    if idx == len(levels):
        raise PowerInfeasible(
            f"required {required_dbm:.2f} dBm exceeds max level {levels[-1]} dBm")
    return PowerLevel(float(levels[idx]))


def rb_failure_probability(snr: float, model: FailModel = FailModel(),
                           snr_th_db: float = 10.0) -> float:
    if model.table is not None:
        xs, ys = zip(*model.table)
        return float(np.interp(snr, xs, ys))
    mid = snr_th_db if model.midpoint_db is None else model.midpoint_db
    z = model.slope * (snr - mid)
    # exp overflow guard: the curve is flat at both ends anyway
    if z > 700:
        return model.p_floor
    return model.p_floor + (model.p_ceil - model.p_floor) / (1.0 + math.exp(z))


@dataclass
class LinkEvaluator:
    """Link profiles for one run, with reproducible random terms.

    Shadowing is a property of the link unless the channel parameters ask
    for per-frame redraws; Rayleigh fading is redrawn every frame.
    Each draw comes from its own generator keyed on the run seed and link
    (and frame), so realisations do not depend on evaluation order or on
    which scenario is simulated.
    """

    params: ChannelParams
    fail_model: FailModel
    snr_th_db: float
    seed: int
    _shadow: dict = field(default_factory=dict, repr=False)
    _fade: dict = field(default_factory=dict, repr=False)

    def _rng(self, tag, src, dst, frame=0):
        return np.random.default_rng((self.seed, tag, frame, src + 1, dst + 1))

    def shadow_db(self, src, dst, frame=0):
        key = (src, dst, frame if self.params.shadowing_per_frame else 0)
        val = self._shadow.get(key)
        if val is None:
            val = float(draw_shadowing(self.params.shadow_sigma_db, self._rng(0x5AD, *key)))
            self._shadow[key] = val
        return val

    def fade_db(self, src, dst, frame):
        if not self.params.rayleigh:
            return 0.0
        key = (src, dst, frame)
        val = self._fade.get(key)
        if val is None:
            val = float(draw_rayleigh_loss(self._rng(0xFAD, *key)))
            self._fade[key] = val
        return val

    def loss(self, src, dst, distance_m, location_loss_db, frame=None):
        """Total loss in a given frame; ``frame=None`` gives the local mean
        (shadowing included, fast fading averaged out)."""
        loss = (deterministic_loss(distance_m, self.params) + location_loss_db
                + self.shadow_db(src, dst, 0 if frame is None else frame))
        if frame is not None:
            loss += self.fade_db(src, dst, frame)
        return loss

    def profile(self, src, dst, distance_m, location_loss_db, frame=None, pt_dbm=None):
        pt = self.params.pt_max_dbm if pt_dbm is None else pt_dbm
        loss = self.loss(src, dst, distance_m, location_loss_db, frame)
        snr = snr_db(received_power(pt, loss), self.params.noise_power_dbm)
        p = rb_failure_probability(snr, self.fail_model, self.snr_th_db)
        return LinkProfile(src, dst, distance_m, loss, pt, snr, p)
