from __future__ import annotations

"""End-to-end flows (init, refine, scheduled placement), reports and experiment drivers."""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from .area_hint import refine
from .bookshelf import DesignBundle
from .caching import ResultCache
from .errors import DivergenceError, PlacementError, StageError
from .gsp_init import gsp_initialize, random_signal
from .macro_schedule import MODELS
from .netlist import hpwl
from .placer import SnapshotCallback, run_global_placement
from .run_config import RunConfig

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
STAGES = ("init", "refine", "place")

FLOWS: Dict[str, Dict[str, bool]] = {
    "flow1": {"skip_init": False, "skip_refine": True, "skip_schedule": True},
    "flow2": {"skip_init": False, "skip_refine": False, "skip_schedule": True},
    "flow3": {"skip_init": False, "skip_refine": True, "skip_schedule": False},
    "full": {"skip_init": False, "skip_refine": False, "skip_schedule": False},
    "baseline": {"skip_init": True, "skip_refine": True, "skip_schedule": True},
}


def flow_name(config: RunConfig) -> str:
    flags = {"skip_init": config.skip_init, "skip_refine": config.skip_refine, "skip_schedule": config.skip_schedule}
    for name, wanted in FLOWS.items():
        if wanted == flags:
            return name
    return "random-init"


class StageTimer:
    """Wall-clock bookkeeping for pipeline stages."""

    def __init__(self, total_steps: int, log: Optional[logging.Logger] = None) -> None:
        self.total_steps = total_steps
        self.current_step = 0
        self.start_time = time.perf_counter()
        self.step_times: Dict[str, Dict[str, float]] = {}
        self.log = log or logger

    def start_step(self, step_name: str, description: str = "") -> None:
        self.current_step += 1
        self.step_times[step_name] = {"start": time.perf_counter()}
        self.log.info("step %d/%d: %s%s", self.current_step, self.total_steps, step_name, f" ({description})" if description else "")

    def end_step(self, step_name: str, result_info: str = "") -> float:
        entry = self.step_times[step_name]
        entry["duration"] = time.perf_counter() - entry["start"]
        self.log.info("finished %s in %.2fs%s", step_name, entry["duration"], f": {result_info}" if result_info else "")
        return entry["duration"]

    @property
    def durations(self) -> Dict[str, float]:
        return {k: v.get("duration", 0.0) for k, v in self.step_times.items()}

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.start_time


@dataclass
class RunReport:
    design: str
    config_hash: str
    seed: int
    flow: str
    stage_times: Dict[str, float] = field(default_factory=dict)
    hpwl: Optional[float] = None
    overflow: Optional[float] = None
    iterations: int = 0
    initial_hpwl: Optional[float] = None
    stop_reason: str = ""
    failed_stage: Optional[str] = None
    error: Optional[str] = None
    trace: Optional[Dict[str, Any]] = None
    schema_version: int = SCHEMA_VERSION

    @property
    def runtime(self) -> float:
        return float(sum(self.stage_times.values()))

    def to_dict(self, *, with_trace: bool = True) -> Dict[str, Any]:
        out = asdict(self)
        out["runtime"] = self.runtime
        if not with_trace:
            out.pop("trace")
        return out


# name -> (accepted types, required)
REPORT_SCHEMA: Dict[str, Tuple[tuple, bool]] = {
    "schema_version": ((int,), True),
    "design": ((str,), True),
    "config_hash": ((str,), True),
    "seed": ((int,), True),
    "flow": ((str,), True),
    "stage_times": ((dict,), True),
    "hpwl": ((int, float, type(None)), True),
    "overflow": ((int, float, type(None)), True),
    "iterations": ((int,), True),
    "runtime": ((int, float), True),
    "initial_hpwl": ((int, float, type(None)), False),
    "stop_reason": ((str,), False),
    "failed_stage": ((str, type(None)), False),
    "error": ((str, type(None)), False),
    "trace": ((dict, type(None)), False),
}


def validate_report(data: Dict[str, Any]) -> List[str]:
    """Problems found in a metrics dict; empty when it matches the schema."""
    problems = []
    if data.get("schema_version") != SCHEMA_VERSION:
        problems.append(f"schema_version must be {SCHEMA_VERSION}, got {data.get('schema_version')!r}")
    for key, (types, required) in REPORT_SCHEMA.items():
        if key not in data:
            if required:
                problems.append(f"missing field {key}")
            continue
        value = data[key]
        if isinstance(value, bool) or not isinstance(value, types):
            problems.append(f"field {key} has type {type(value).__name__}")
    for key in sorted(set(data) - set(REPORT_SCHEMA)):
        problems.append(f"unexpected field {key}")
    times = data.get("stage_times")
    if isinstance(times, dict):
        for stage, seconds in times.items():
            if stage not in STAGES:
                problems.append(f"unknown stage {stage}")
            elif not isinstance(seconds, (int, float)) or seconds < 0:
                problems.append(f"stage time {stage} must be a number >= 0")
    if data.get("failed_stage") is None and data.get("hpwl") is None and "failed_stage" in data:
        problems.append("successful report without hpwl")
    return problems


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def initial_positions(bundle: DesignBundle, config: RunConfig) -> np.ndarray:
    """Spectral init, or the random-init baseline sample when ``skip_init``."""
    netlist = bundle.netlist
    if config.skip_init:
        centers = random_signal(netlist, config.seed, config.init_window)
        positions = netlist.positions.copy()
        movable = netlist.movable_mask
        positions[movable] = netlist.lower_left(centers)[movable]
        return netlist.clamp_to_region(positions)
    return gsp_initialize(netlist, config.init_config())


def refine_positions(bundle: DesignBundle, positions: np.ndarray, config: RunConfig) -> np.ndarray:
    netlist = bundle.netlist
    hint = config.hint_config()
    if hint.iterations == 0:
        return positions
    centers = refine(netlist.centers(positions), netlist, hint)
    out = positions.copy()
    movable = netlist.movable_mask
    out[movable] = netlist.lower_left(centers)[movable]
    return out


def run_pipeline(
    bundle: DesignBundle,
    config: RunConfig,
    *,
    snapshot: Optional[SnapshotCallback] = None,
) -> Tuple[np.ndarray, RunReport]:
    """init -> refine -> (scheduled) global placement.

    Raises :class:`StageError` carrying the partial report when a stage fails.
    """
    netlist = bundle.netlist
    report = RunReport(netlist.name, config.config_hash(), config.seed, flow_name(config))
    timer = StageTimer(len(STAGES))
    positions = bundle.positions
    for stage in STAGES:
        timer.start_step(stage)
        try:
            if stage == "init":
                positions = initial_positions(bundle, config)
                report.initial_hpwl = hpwl(netlist, positions)
            elif stage == "refine":
                positions = refine_positions(bundle, positions, config)
            else:
                positions, trace = run_global_placement(
                    netlist, positions, config.placer_config(), config.schedule_spec(),
                    callback=snapshot, snapshot_interval=config.snapshot_interval,
                )
                report.trace = trace.to_dict()
                report.iterations = trace.iterations
                report.stop_reason = trace.stop_reason
                report.overflow = trace.overflow[-1] if trace.overflow else trace.initial_overflow
        except PlacementError as exc:
            timer.end_step(stage, "failed")
            report.stage_times = timer.durations
            report.failed_stage = stage
            report.error = str(exc)
            if isinstance(exc, DivergenceError) and exc.trace is not None:
                report.trace = exc.trace.to_dict()
            raise StageError(stage, exc, report) from exc
        timer.end_step(stage)
    report.stage_times = timer.durations
    report.hpwl = hpwl(netlist, positions)
    logger.info("%s [%s] seed %d: HPWL %.6g overflow %.4f in %.2fs", netlist.name, report.flow, config.seed, report.hpwl, report.overflow, report.runtime)
    return positions, report


def evaluate(bundle: DesignBundle, config: RunConfig, cache: Optional[ResultCache] = None) -> Dict[str, Any]:
    """Report dict (without trace) for one run, served from ``cache`` when possible."""
    key = config.to_dict()
    fingerprint = bundle.netlist.fingerprint()
    if cache is not None:
        hit = cache.get(fingerprint, key)
        if hit is not None:
            return hit
    _, report = run_pipeline(bundle, config)
    out = report.to_dict(with_trace=False)
    if cache is not None:
        cache.set(fingerprint, key, out)
    return out


def _evaluate_job(job: Tuple[DesignBundle, Dict[str, Any], Optional[str]]) -> Dict[str, Any]:
    bundle, overrides, cache_dir = job
    config = RunConfig().with_overrides(overrides)
    cache = ResultCache(Path(cache_dir)) if cache_dir else None
    try:
        return evaluate(bundle, config, cache)
    except StageError as exc:
        return exc.report.to_dict(with_trace=False)


def run_many(
    jobs: Sequence[Tuple[DesignBundle, RunConfig]],
    *,
    workers: int = 1,
    cache: Optional[ResultCache] = None,
    desc: str = "runs",
) -> List[Dict[str, Any]]:
    """Evaluate independent runs, optionally in worker processes; order is preserved."""
    cache_dir = str(cache.cache_dir) if cache is not None else None
    payload = [(bundle, config.to_dict(), cache_dir) for bundle, config in jobs]
    results: List[Dict[str, Any]] = []
    with tqdm(total=len(payload), desc=desc) as bar:
        if workers > 1 and len(payload) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for result in pool.map(_evaluate_job, payload):
                    results.append(result)
                    bar.update(1)
        else:
            for item in payload:
                results.append(_evaluate_job(item))
                bar.update(1)
    return results


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def seed_sweep(
    bundle: DesignBundle,
    config: RunConfig,
    n_seeds: int,
    *,
    workers: int = 1,
    cache: Optional[ResultCache] = None,
) -> Dict[str, Any]:
    """min / max / mean HPWL over ``n_seeds`` consecutive seeds starting at ``config.seed``."""
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    configs = [config.with_overrides({"seed": config.seed + i}) for i in range(n_seeds)]
    runs = run_many([(bundle, c) for c in configs], workers=workers, cache=cache, desc="seeds")
    values = np.array([r["hpwl"] for r in runs if r.get("hpwl") is not None], dtype=float)
    summary: Dict[str, Any] = {"design": bundle.name, "n_seeds": n_seeds, "failed": n_seeds - int(values.size), "runs": runs}
    if values.size:
        lo, hi, mean = float(values.min()), float(values.max()), float(values.mean())
        summary.update({"min": lo, "max": hi, "mean": mean, "range": hi - lo, "range_over_avg": (hi - lo) / mean if mean else 0.0})
    return summary


def density_sweep(
    bundle: DesignBundle,
    config: RunConfig,
    densities: Sequence[float],
    *,
    workers: int = 1,
    cache: Optional[ResultCache] = None,
) -> pd.DataFrame:
    """Pipeline and baseline runs per target density (two rows per density)."""
    jobs, labels = [], []
    for d in densities:
        base = config.with_overrides({"target_density": float(d)})
        for flow in ("pipeline", "baseline"):
            cfg = base if flow == "pipeline" else base.with_overrides(FLOWS["baseline"])
            jobs.append((bundle, cfg))
            labels.append((float(d), flow))
    runs = run_many(jobs, workers=workers, cache=cache, desc="densities")
    rows = [
        {"design": bundle.name, "target_density": d, "flow": flow, "hpwl": r.get("hpwl"), "overflow": r.get("overflow"),
         "iterations": r.get("iterations"), "runtime": r.get("runtime"), "failed_stage": r.get("failed_stage")}
        for (d, flow), r in zip(labels, runs)
    ]
    return pd.DataFrame(rows)


def _median_hpwl(runs: List[Dict[str, Any]]) -> float:
    values = [r["hpwl"] for r in runs if r.get("hpwl") is not None]
    return float(np.median(values)) if values else float("nan")


def compare_flows(
    bundles: Sequence[DesignBundle],
    config: RunConfig,
    seeds: Sequence[int],
    *,
    flows: Sequence[str] = ("full", "baseline"),
    workers: int = 1,
    cache: Optional[ResultCache] = None,
) -> pd.DataFrame:
    """Median HPWL over ``seeds`` per design and flow; one row per design."""
    rows = []
    for bundle in bundles:
        row: Dict[str, Any] = {"design": bundle.name}
        for flow in flows:
            cfgs = [config.with_overrides({**FLOWS[flow], "seed": int(s)}) for s in seeds]
            runs = run_many([(bundle, c) for c in cfgs], workers=workers, cache=cache, desc=f"{bundle.name}:{flow}")
            row[f"{flow}_median_hpwl"] = _median_hpwl(runs)
            row[f"{flow}_median_runtime"] = float(np.median([r.get("runtime", 0.0) for r in runs]))
        if "full" in flows and "baseline" in flows:
            row["full_wins"] = bool(row["full_median_hpwl"] <= row["baseline_median_hpwl"])
        rows.append(row)
    return pd.DataFrame(rows)


def schedule_ablation(
    bundles: Sequence[DesignBundle],
    config: RunConfig,
    seeds: Sequence[int],
    *,
    models: Sequence[str] = MODELS,
    workers: int = 1,
    cache: Optional[ResultCache] = None,
) -> pd.DataFrame:
    """Median HPWL of the full flow per design and schedule model."""
    rows = []
    for bundle in bundles:
        row: Dict[str, Any] = {"design": bundle.name}
        for model in models:
            cfgs = [config.with_overrides({**FLOWS["full"], "schedule_model": model, "seed": int(s)}) for s in seeds]
            runs = run_many([(bundle, c) for c in cfgs], workers=workers, cache=cache, desc=f"{bundle.name}:{model}")
            row[model] = _median_hpwl(runs)
        rows.append(row)
    return pd.DataFrame(rows)
