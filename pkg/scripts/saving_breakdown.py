"""Where the RB saving comes from: per-category RB and delay means, both scenarios.

Users are grouped by (type, designated poor or natural, D2D-scenario decision).
    python scripts/saving_breakdown.py [--n-active 50] [--seeds 20]
"""
import argparse
from collections import defaultdict
from dataclasses import replace

import numpy as np

from d2dsim.engine import Scenario, ScenarioConfig, simulate_scenario

ap = argparse.ArgumentParser()
ap.add_argument("--n-active", type=int, default=50)
ap.add_argument("--seeds", type=int, default=20)
args = ap.parse_args()

base = ScenarioConfig(n_active=args.n_active)
rows = defaultdict(list)
for seed in range(args.seeds):
    _, cell, _, world = simulate_scenario(replace(base, scenario=Scenario.CELLULAR_ONLY), seed,
                                          keep_grids=True)
    _, d2d, _, _ = simulate_scenario(base, seed, keep_grids=True)
    for a, b in zip(cell, d2d):
        ue = world.topology.ues[a.requester]
        key = (ue.user_type.value, "designated" if ue.location_loss_db else "natural",
               b.decision.mode.value)
        rows[key].append((a.rbs_consumed + a.control_rbs_consumed,
                          b.rbs_consumed + b.control_rbs_consumed, a.delay_ms(), b.delay_ms()))

total_cell = sum(np.array(v)[:, 0].sum() for v in rows.values())
total_d2d = sum(np.array(v)[:, 1].sum() for v in rows.values())
print(f"{'type':6} {'origin':10} {'decision':10} {'per run':>7} {'rb cell':>8} {'rb d2d':>7} "
      f"{'share':>6} {'delay cell':>10} {'delay d2d':>9}")
for key, v in sorted(rows.items()):
    v = np.array(v, float)
    print(f"{key[0]:6} {key[1]:10} {key[2]:10} {len(v) / args.seeds:7.1f} {v[:, 0].mean():8.1f} "
          f"{v[:, 1].mean():7.1f} {v[:, 0].sum() / total_cell:6.0%} {v[:, 2].mean():10.1f} "
          f"{v[:, 3].mean():9.1f}")
print(f"RB saving: {(total_cell - total_d2d) / total_cell:.1%}")
