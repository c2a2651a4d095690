"""Command line entry point: ``d2dsim run | single | validate``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .engine import Scenario, simulate_scenario
from .experiment import (ConfigParseError, ConfigValidationError, load_plan,
                         run_experiment)


def _parser():
    p = argparse.ArgumentParser(prog="d2dsim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="full sweep over active users, scenarios and seeds")
    run.add_argument("--config", help="YAML config (defaults to the built-in plan)")
    run.add_argument("--out", help="output directory (overrides experiment.output_dir)")

    single = sub.add_parser("single", help="one scenario and seed, metrics as JSON")
    single.add_argument("--config")
    single.add_argument("--seed", type=int, default=0)
    single.add_argument("--scenario", choices=[s.value for s in Scenario])
    single.add_argument("--n-active", type=int, dest="n_active")
    single.add_argument("--per-user", action="store_true",
                        help="include per-user delay and RB vectors")

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("--config", required=True)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        plan = load_plan(args.config)
    except (ConfigParseError, ConfigValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print(f"ok: {len(plan.jobs())} runs planned")
        return 0

    try:
        if args.command == "run":
            status = run_experiment(plan, args.out)
            print(f"wrote outputs to {args.out or plan.output_dir}")
            return status
        cfg = plan.base
        if args.scenario:
            cfg = replace(cfg, scenario=Scenario(args.scenario))
        if args.n_active is not None:
            cfg = replace(cfg, n_active=args.n_active)
        metrics = simulate_scenario(cfg, args.seed).as_dict()
        if not args.per_user:
            metrics.pop("per_user_delay_ms")
            metrics.pop("per_user_rbs")
        print(json.dumps(metrics, indent=2))
        return 0
    except Exception as exc:  # any run failure is reported, never a traceback dump
        print(f"error: run failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
