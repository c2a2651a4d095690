"""Experiment plans: YAML config ingestion, seed / active-user sweeps and the
CSV + summary outputs behind the three comparison figures."""
from __future__ import annotations

import csv
import io
import math
import os
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .channel import ChannelParams, FailModel
from .engine import (FIGURE_METRICS, InsufficientRuns, OverheadParams, Scenario,
                     ScenarioConfig, simulate_scenario, t_interval)

FIGURE_FILES = {"rb": "fig_rb.csv", "delay": "fig_delay.csv", "energy": "fig_energy.csv"}
METRICS_COLUMNS = ["scenario", "n_active", "metric", "mean", "ci_half_width", "n_seeds",
                   "ci_flag"]


class ConfigParseError(ValueError):
    pass


class ConfigValidationError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass(frozen=True)
class ExperimentPlan:
    base: ScenarioConfig = ScenarioConfig()
    sweep_active_users: tuple[int, ...] = (10, 20, 30, 40, 50)
    scenarios: tuple[Scenario, ...] = (Scenario.CELLULAR_ONLY, Scenario.CELLULAR_WITH_D2D)
    output_dir: str = "results"
    confidence_level: float = 0.95
    rel_target: float = 0.02

    @property
    def seeds(self) -> tuple[int, ...]:
        return self.base.seeds

    def problems(self) -> list[str]:
        # the sweep overrides n_active, so check the base at each sweep value
        out = []
        for n in self.sweep_active_users or (self.base.n_active,):
            out.extend(p for p in replace(self.base, n_active=n).problems() if p not in out)
        if not self.sweep_active_users:
            out.append("experiment.sweep_active_users must not be empty")
        for n in self.sweep_active_users:
            if not 0 <= n <= self.base.n_total:
                out.append(f"sweep value {n} outside [0, n_total={self.base.n_total}]")
        out = [p for p in out if not p.startswith("n_active=")]
        if not self.scenarios:
            out.append("experiment.scenarios must not be empty")
        if not 0 < self.confidence_level < 1:
            out.append("experiment.confidence_level must lie in (0, 1)")
        return out

    def jobs(self):
        """(n_active, scenario, seed) triples in output order."""
        return [(n, sc, seed) for n in self.sweep_active_users for sc in self.scenarios
                for seed in self.seeds]


# --- config ingestion --------------------------------------------------------

_SECTIONS = {"channel": ChannelParams, "fail_model": FailModel, "overhead": OverheadParams}
_TUPLE_FIELDS = {"power_levels_dbm", "demand_rbs", "type2_loss_db", "tdd_pattern", "seeds"}


def _expand_seeds(value):
    if isinstance(value, dict):
        start = int(value.get("start", 0))
        return tuple(range(start, start + int(value["count"])))
    if isinstance(value, int):
        return tuple(range(value))
    return tuple(int(v) for v in value)


def parse_config(text: str) -> ExperimentPlan:
    """Build a plan from a YAML document; missing keys keep their defaults."""
    try:
        doc = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigParseError(f"malformed config{where}: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigParseError("config root must be a mapping")

    problems = []
    doc = dict(doc)
    exp = doc.pop("experiment", {}) or {}
    scenario_kwargs = {}
    known = {f.name for f in fields(ScenarioConfig)}
    for key, value in doc.items():
        if key not in known:
            problems.append(f"unknown field '{key}'")
        elif key in _SECTIONS:
            cls = _SECTIONS[key]
            if not isinstance(value, dict):
                problems.append(f"section '{key}' must be a mapping")
                continue
            sub_known = {f.name for f in fields(cls)}
            bad = sorted(set(value) - sub_known)
            problems.extend(f"unknown field '{key}.{b}'" for b in bad)
            try:
                kwargs = {k: v for k, v in value.items() if k in sub_known}
                if "table" in kwargs and kwargs["table"] is not None:
                    kwargs["table"] = tuple(tuple(row) for row in kwargs["table"])
                scenario_kwargs[key] = cls(**kwargs)
            except (TypeError, ValueError) as exc:
                problems.append(f"{key}: {exc}")
        elif key == "seeds":
            try:
                scenario_kwargs[key] = _expand_seeds(value)
            except (TypeError, ValueError, KeyError) as exc:
                problems.append(f"seeds: cannot interpret {value!r} ({exc})")
        elif key == "tdd_pattern" and isinstance(value, str):
            scenario_kwargs[key] = tuple(value)
        elif key in _TUPLE_FIELDS:
            scenario_kwargs[key] = tuple(value)
        else:
            scenario_kwargs[key] = value

    plan_kwargs = {}
    if not isinstance(exp, dict):
        problems.append("section 'experiment' must be a mapping")
        exp = {}
    for key, value in exp.items():
        if key == "sweep_active_users":
            plan_kwargs[key] = tuple(int(v) for v in value)
        elif key == "scenarios":
            try:
                plan_kwargs[key] = tuple(Scenario(v) for v in value)
            except ValueError as exc:
                problems.append(f"experiment.scenarios: {exc}")
        elif key in ("output_dir", "confidence_level", "rel_target"):
            plan_kwargs[key] = value
        else:
            problems.append(f"unknown field 'experiment.{key}'")

    try:
        base = ScenarioConfig(**scenario_kwargs)
    except (TypeError, ValueError) as exc:
        problems.append(str(exc))
        base = ScenarioConfig()
    plan = ExperimentPlan(base=base, **plan_kwargs)
    problems.extend(plan.problems())
    if problems:
        raise ConfigValidationError(problems)
    return plan


def load_plan(path) -> ExperimentPlan:
    if path is None:
        return ExperimentPlan()
    return parse_config(Path(path).read_text())


# --- running -----------------------------------------------------------------

def fmt(x) -> str:
    """Six significant digits, never in exponent notation."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if not math.isfinite(x):
        return "nan"
    return np.format_float_positional(x, precision=6, unique=False, fractional=False,
                                      trim="-")


def worker_count() -> int:
    env = os.environ.get("D2DSIM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _run_job(args):
    config, seed = args
    return simulate_scenario(config, seed)


def run_all(plan: ExperimentPlan, workers: int | None = None):
    """Simulate every job of the plan; results keyed by (n_active, scenario)."""
    workers = worker_count() if workers is None else workers
    jobs = plan.jobs()
    payload = [(replace(plan.base, n_active=n, scenario=sc), seed) for n, sc, seed in jobs]
    if workers > 1 and len(payload) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, payload, chunksize=8))
    else:
        results = [_run_job(p) for p in payload]
    grouped = {}
    for (n, sc, _), m in zip(jobs, results):
        grouped.setdefault((n, sc), []).append(m)
    return grouped


def summarise(plan: ExperimentPlan, grouped):
    """Rows of (scenario, n_active, metric, mean, half_width, n, flag)."""
    rows = []
    for n in plan.sweep_active_users:
        for sc in plan.scenarios:
            runs = grouped[(n, sc)]
            for name, attr in FIGURE_METRICS.items():
                values = [getattr(m, attr) for m in runs]
                try:
                    ci = t_interval(values, plan.confidence_level, plan.rel_target)
                    mean, hw = ci.mean, ci.half_width
                    flag = "ok" if ci.meets_target else "wide"
                except InsufficientRuns:
                    mean, hw, flag = float(np.mean(values)), math.nan, "insufficient"
                rows.append((sc.value, n, name, mean, hw, len(values), flag))
    return rows


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def render_outputs(plan: ExperimentPlan, rows) -> dict[str, str]:
    files = {"metrics.csv": _csv_text(METRICS_COLUMNS, rows)}
    means = {(r[0], r[1], r[2]): r[3] for r in rows}
    flags = {(r[0], r[1], r[2]): r[6] for r in rows}
    names = [sc.value for sc in plan.scenarios]
    for metric, fname in FIGURE_FILES.items():
        body = [[n] + [means[(sc, n, metric)] for sc in names]
                for n in plan.sweep_active_users]
        files[fname] = _csv_text(["n_active"] + names, body)
    files["summary.txt"] = _summary_text(plan, means, flags)
    return files


def relative_saving(baseline: float, value: float) -> float:
    return (baseline - value) / baseline if baseline else 0.0


def _summary_text(plan, means, flags) -> str:
    cell, d2d = Scenario.CELLULAR_ONLY.value, Scenario.CELLULAR_WITH_D2D.value
    lines = [
        "D2D offloading vs cellular-only uplink",
        f"seeds per point: {len(plan.seeds)}; confidence level {plan.confidence_level:g}; "
        f"half-width target {plan.rel_target:.0%} of mean",
        "",
    ]
    if cell not in [s.value for s in plan.scenarios] or d2d not in [s.value for s in plan.scenarios]:
        lines.append("comparison needs both scenarios in the plan")
        return "\n".join(lines) + "\n"
    lines.append(f"{'n_active':>8}  {'rb_cell':>10}  {'rb_d2d':>10}  {'rb_saving_%':>11}  "
                 f"{'delay_red_%':>11}  {'energy_red_%':>12}")
    for n in plan.sweep_active_users:
        rb = relative_saving(means[(cell, n, "rb")], means[(d2d, n, "rb")])
        dl = relative_saving(means[(cell, n, "delay")], means[(d2d, n, "delay")])
        en = relative_saving(means[(cell, n, "energy")], means[(d2d, n, "energy")])
        lines.append(f"{n:>8}  {fmt(means[(cell, n, 'rb')]):>10}  {fmt(means[(d2d, n, 'rb')]):>10}  "
                     f"{rb * 100:>11.4f}  {dl * 100:>11.4f}  {en * 100:>12.4f}")
    wide = sorted({f"{k[0]}/{k[1]}/{k[2]}" for k, v in flags.items() if v != "ok"})
    lines.append("")
    if wide:
        lines.append(f"points missing the CI target ({len(wide)}): " + ", ".join(wide))
    else:
        lines.append("all points meet the CI target")
    return "\n".join(lines) + "\n"


def run_experiment(plan: ExperimentPlan, output_dir=None, workers: int | None = None) -> int:
    """Run the plan and write outputs atomically; returns the exit status."""
    out = Path(output_dir or plan.output_dir)
    problems = plan.problems()
    if problems:
        raise ConfigValidationError(problems)
    grouped = run_all(plan, workers)
    files = render_outputs(plan, summarise(plan, grouped))
    out.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".d2dsim-", dir=out.parent))
    try:
        for name, text in files.items():
            (staging / name).write_text(text)
        out.mkdir(parents=True, exist_ok=True)
        for name in files:
            os.replace(staging / name, out / name)
    except BaseException:
        for name in files:
            (out / name).unlink(missing_ok=True)
        raise
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return 0
