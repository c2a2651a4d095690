"""RB saving at one sweep point under alternative channel / failure-model settings.

    python scripts/sensitivity.py [--n-active 50] [--seeds 20]
"""
import argparse
from dataclasses import replace

import numpy as np

from d2dsim.channel import ChannelParams, FailModel
from d2dsim.engine import Scenario, ScenarioConfig, simulate_scenario

ap = argparse.ArgumentParser()
ap.add_argument("--n-active", type=int, default=50)
ap.add_argument("--seeds", type=int, default=20)
args = ap.parse_args()

VARIANTS = {
    "defaults": {},
    "noise -125 dBm": {"channel": ChannelParams(noise_power_dbm=-125.0)},
    "midpoint 7 dB": {"fail_model": FailModel(midpoint_db=7.0)},
    "p_ceil 0.95": {"fail_model": FailModel(p_ceil=0.95)},
    "midpoint 7 dB, p_ceil 0.95": {"fail_model": FailModel(midpoint_db=7.0, p_ceil=0.95)},
    "slope 1.5": {"fail_model": FailModel(slope=1.5)},
    "d2d radius 30 m": {"d2d_radius_m": 30.0},
    "no control overhead": {"overhead": replace(ScenarioConfig().overhead, discovery_rbs=0,
                                                handshake_rbs=0)},
}

for name, kw in VARIANTS.items():
    cfg = replace(ScenarioConfig(n_active=args.n_active), **kw)
    cell = [simulate_scenario(replace(cfg, scenario=Scenario.CELLULAR_ONLY), s).total_rbs
            for s in range(args.seeds)]
    d2d = [simulate_scenario(cfg, s).total_rbs for s in range(args.seeds)]
    saving = 1 - np.mean(d2d) / np.mean(cell)
    print(f"{name:28} cellular {np.mean(cell):7.1f}  d2d {np.mean(d2d):7.1f}  saving {saving:6.1%}")
