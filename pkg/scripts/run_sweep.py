"""Run the full active-user sweep and print the summary table.

    python scripts/run_sweep.py [--config configs/default.yaml] [--out results]
"""
import argparse
import time
from pathlib import Path

from d2dsim.experiment import load_plan, run_experiment

ap = argparse.ArgumentParser()
ap.add_argument("--config")
ap.add_argument("--out", default="results")
args = ap.parse_args()

plan = load_plan(args.config)
t0 = time.perf_counter()
run_experiment(plan, args.out)
print(Path(args.out, "summary.txt").read_text())
print(f"{len(plan.jobs())} runs in {time.perf_counter() - t0:.1f} s")
