from __future__ import annotations

"""Multi-objective parameter search: warm start, MOTPE exploration, front distillation.

Sampling uses optuna's multi-objective TPE; ranking, crowding, hypervolume and
k-means distillation of the front are computed here on plain arrays.
"""

import json
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import optuna
import pandas as pd
from optuna.distributions import CategoricalDistribution, FloatDistribution, IntDistribution
from optuna.exceptions import ExperimentalWarning
from optuna.samplers import TPESampler
from optuna.trial import TrialState, create_trial
from sklearn.cluster import KMeans

from .bookshelf import DesignBundle
from .caching import ResultCache
from .errors import ConfigError, PlacementError
from .pipeline import evaluate
from .run_config import RunConfig

logger = logging.getLogger(__name__)

OBJECTIVES = ("hpwl", "overflow", "runtime")
PARAM_KINDS = ("real", "int", "categorical")

Evaluator = Callable[[Dict[str, Any]], Sequence[float]]


# ---------------------------------------------------------------------------
# search space
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str
    low: Optional[float] = None
    high: Optional[float] = None
    choices: Tuple[Any, ...] = ()
    log: bool = False

    def __post_init__(self) -> None:
        if self.kind not in PARAM_KINDS:
            raise ConfigError(f"parameter {self.name}: kind must be one of {PARAM_KINDS}")
        if self.kind == "categorical":
            if not self.choices:
                raise ConfigError(f"parameter {self.name}: categorical needs choices")
            return
        if self.low is None or self.high is None or not (math.isfinite(self.low) and math.isfinite(self.high)):
            raise ConfigError(f"parameter {self.name}: finite bounds required")
        if not self.low < self.high:
            raise ConfigError(f"parameter {self.name}: need low < high")
        if self.log and self.low <= 0:
            raise ConfigError(f"parameter {self.name}: log scale needs low > 0")

    def distribution(self):
        if self.kind == "real":
            return FloatDistribution(float(self.low), float(self.high), log=self.log)
        if self.kind == "int":
            return IntDistribution(int(self.low), int(self.high), log=self.log)
        return CategoricalDistribution(list(self.choices))

    def contains(self, value: Any) -> bool:
        if self.kind == "categorical":
            return value in self.choices
        if self.kind == "int" and (isinstance(value, bool) or int(value) != value):
            return False
        return self.low <= value <= self.high


@dataclass(frozen=True)
class ParamSpace:
    params: Tuple[ParamSpec, ...]

    def __post_init__(self) -> None:
        names = [p.name for p in self.params]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ConfigError(f"duplicate parameter names: {', '.join(dupes)}")

    def __iter__(self) -> Iterator[ParamSpec]:
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    @property
    def names(self) -> List[str]:
        return [p.name for p in self.params]

    def distributions(self) -> Dict[str, Any]:
        return {p.name: p.distribution() for p in self.params}

    def contains(self, assignment: Mapping[str, Any]) -> bool:
        return all(p.name in assignment and p.contains(assignment[p.name]) for p in self.params)


def default_space() -> ParamSpace:
    """Tuning space over the init, refine, schedule and placer keys."""
    return ParamSpace((
        ParamSpec("low_filter_sigma", "real", 0.5, 8.0),
        ParamSpec("mid_filter_sigma", "real", 0.5, 8.0),
        ParamSpec("high_filter_sigma", "real", 0.5, 8.0),
        ParamSpec("low_filter_k", "int", 1, 8),
        ParamSpec("mid_filter_k", "int", 1, 6),
        ParamSpec("high_filter_k", "int", 1, 6),
        ParamSpec("low_filter_effect", "real", 0.0, 1.0),
        ParamSpec("mid_filter_effect", "real", 0.0, 1.0),
        ParamSpec("refine_iteration", "int", 0, 8),
        ParamSpec("refine_num_bin_xy", "categorical", choices=(16, 32, 64)),
        ParamSpec("detection_ratio", "real", 0.02, 0.3),
        ParamSpec("bin_capacity", "real", 0.5, 1.0),
        ParamSpec("schedule_iteration", "int", 100, 600),
        ParamSpec("sigma_factor", "real", 0.005, 0.5, log=True),
        ParamSpec("density_weight", "real", 1e-6, 1e-2, log=True),
        ParamSpec("gamma", "real", 0.1, 4.0),
        ParamSpec("GP_learning_rate", "real", 0.05, 2.0, log=True),
        ParamSpec("GP_wirelength", "categorical", choices=("WA", "LSE")),
        ParamSpec("RePlAce_ref_hpwl", "real", 0.0, 1000.0),
        ParamSpec("RePlAce_LOWER_PCOF", "real", 0.9, 0.99),
        ParamSpec("RePlAce_UPPER_PCOF", "real", 1.01, 1.2),
    ))


def default_assignment(space: ParamSpace, config: Optional[RunConfig] = None) -> Dict[str, Any]:
    """Warm-start assignment taken from ``config`` (defaults when omitted)."""
    values = (config or RunConfig()).to_dict()
    if values.get("bin_capacity") is None:
        values["bin_capacity"] = values["target_density"]
    out = {}
    for p in space:
        if p.name not in values:
            raise ConfigError(f"parameter {p.name} has no default in the run config")
        out[p.name] = values[p.name]
    if not space.contains(out):
        bad = [p.name for p in space if not p.contains(out[p.name])]
        raise ConfigError(f"warm-start values outside the search space: {', '.join(bad)}")
    return out


# ---------------------------------------------------------------------------
# trials and Pareto machinery
# ---------------------------------------------------------------------------

@dataclass
class Trial:
    number: int
    params: Dict[str, Any]
    objectives: Optional[Tuple[float, ...]] = None
    status: str = "complete"
    error: Optional[str] = None
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == "complete" and self.objectives is not None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "number": self.number,
            "params": self.params,
            "objectives": list(self.objectives) if self.objectives is not None else None,
            "status": self.status,
            "error": self.error,
            "seconds": self.seconds,
        }


def dominates(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.all(a <= b) and np.any(a < b))


def pareto_rank(objectives: np.ndarray) -> np.ndarray:
    """Non-dominated sorting; rank 0 is the front."""
    pts = np.asarray(objectives, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("pareto_rank needs a non-empty (n, m) array")
    n = pts.shape[0]
    le = np.all(pts[:, None, :] <= pts[None, :, :], axis=2)
    lt = np.any(pts[:, None, :] < pts[None, :, :], axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    count = dom.sum(axis=0)
    ranks = np.full(n, -1, dtype=np.int64)
    current = np.flatnonzero(count == 0)
    rank = 0
    while current.size:
        ranks[current] = rank
        count = count - dom[current].sum(axis=0)
        count[ranks >= 0] = -1
        current = np.flatnonzero(count == 0)
        rank += 1
    return ranks


def crowding_distance(objectives: np.ndarray) -> np.ndarray:
    pts = np.asarray(objectives, dtype=float)
    n, m = pts.shape
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for j in range(m):
        order = np.argsort(pts[:, j], kind="stable")
        span = pts[order[-1], j] - pts[order[0], j]
        dist[order[0]] = dist[order[-1]] = np.inf
        if span <= 0:
            continue
        dist[order[1:-1]] += (pts[order[2:], j] - pts[order[:-2], j]) / span
    return dist


def split_size(n: int, gamma_q: float) -> int:
    """Size of the "good" set: ``max(1, ceil(gamma_q * n))``."""
    return max(1, int(math.ceil(gamma_q * n)))


def hypervolume(points: np.ndarray, ref: Sequence[float]) -> float:
    """Exact dominated hypervolume (minimisation) bounded by ``ref``."""
    ref = np.asarray(ref, dtype=float)
    pts = np.asarray(points, dtype=float).reshape(-1, ref.size)
    pts = pts[np.all(pts < ref, axis=1)]
    if pts.shape[0] == 0:
        return 0.0
    if ref.size == 1:
        return float(ref[0] - pts[:, 0].min())
    if ref.size == 2:
        pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
        hv, best_y = 0.0, ref[1]
        for x, y in pts:
            if y < best_y:
                hv += (ref[0] - x) * (best_y - y)
                best_y = y
        return float(hv)
    pts = pts[np.argsort(pts[:, -1], kind="stable")]
    hv = 0.0
    for i in range(pts.shape[0]):
        upper = pts[i + 1, -1] if i + 1 < pts.shape[0] else ref[-1]
        depth = upper - pts[i, -1]
        if depth > 0:
            hv += depth * hypervolume(pts[: i + 1, :-1], ref[:-1])
    return float(hv)


@dataclass
class ParetoFront:
    trials: List[Trial]
    domination_counts: List[int] = field(default_factory=list)
    crowding: List[float] = field(default_factory=list)

    @classmethod
    def from_trials(cls, trials: Sequence[Trial]) -> "ParetoFront":
        done = [t for t in trials if t.ok]
        if not done:
            return cls([], [], [])
        pts = np.array([t.objectives for t in done], dtype=float)
        ranks = pareto_rank(pts)
        front = [t for t, r in zip(done, ranks) if r == 0]
        counts = [int(sum(dominates(np.array(f.objectives), p) for p in pts)) for f in front]
        crowd = crowding_distance(np.array([f.objectives for f in front], dtype=float)).tolist()
        return cls(front, counts, crowd)

    def objectives(self) -> np.ndarray:
        return np.array([t.objectives for t in self.trials], dtype=float).reshape(len(self.trials), -1)

    def __len__(self) -> int:
        return len(self.trials)


def distill(front: Sequence[Trial], k: int, *, seed: int = 0) -> List[Trial]:
    """k-means representatives of the front in min-max normalised objective space.

    Returns each cluster's member nearest its centroid, sorted by trial number.
    """
    unique: Dict[Tuple[float, ...], Trial] = {}
    for t in sorted(front, key=lambda t: t.number):
        unique.setdefault(tuple(t.objectives), t)
    members = list(unique.values())
    if k >= len(members):
        return members
    if k < 1:
        raise ValueError("k must be >= 1")
    pts = np.array([t.objectives for t in members], dtype=float)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    norm = (pts - lo) / span
    km = KMeans(n_clusters=k, n_init=50, random_state=seed).fit(norm)
    picks = []
    for c in range(k):
        idx = np.flatnonzero(km.labels_ == c)
        if idx.size == 0:
            continue
        d = np.linalg.norm(norm[idx] - km.cluster_centers_[c], axis=1)
        picks.append(members[int(idx[np.argmin(d)])])
    return sorted(picks, key=lambda t: t.number)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _sampler(gamma_q: float, n_candidates: int, n_startup: int, seed: Optional[int]) -> TPESampler:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExperimentalWarning)
        return TPESampler(
            n_startup_trials=n_startup,
            n_ei_candidates=n_candidates,
            gamma=lambda n: split_size(n, gamma_q),
            seed=seed,
        )


def _new_study(n_objectives: int, sampler: TPESampler) -> optuna.Study:
    optuna.logging.set_verbosity(optuna.logging.WARNING)
    return optuna.create_study(directions=["minimize"] * n_objectives, sampler=sampler)


def motpe_suggest(
    history: Sequence[Trial],
    space: ParamSpace,
    gamma_q: float = 0.25,
    n_candidates: int = 24,
    *,
    seed: Optional[int] = None,
) -> Dict[str, Any]:
    """One assignment maximising ``l(x)/g(x)`` given the finished ``history``.

    An empty history gives a uniform sample; failed trials are ignored.
    """
    done = [t for t in history if t.ok]
    n_obj = len(done[0].objectives) if done else len(OBJECTIVES)
    # one startup trial makes an empty history fall back to uniform sampling
    study = _new_study(n_obj, _sampler(gamma_q, n_candidates, 0 if done else 1, seed))
    dists = space.distributions()
    for t in done:
        study.add_trial(create_trial(params=dict(t.params), distributions=dists, values=list(t.objectives)))
    return dict(study.ask(dists).params)


@dataclass(frozen=True)
class TunerConfig:
    gamma_q: float = 0.25
    n_candidates: int = 24
    n_startup: int = 10
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma_q < 1.0:
            raise ConfigError("gamma_q must lie in (0, 1)")
        if self.n_candidates < 1 or self.n_startup < 0 or self.workers < 1:
            raise ConfigError("n_candidates and workers must be >= 1, n_startup >= 0")


@dataclass
class TunerResult:
    trials: List[Trial]
    front: ParetoFront


def _timed(evaluator: Evaluator, params: Dict[str, Any]) -> Tuple[Optional[Tuple[float, ...]], Optional[str], float]:
    start = time.perf_counter()
    try:
        values = tuple(float(v) for v in evaluator(params))
        if not all(math.isfinite(v) for v in values):
            return None, f"non-finite objectives {values}", time.perf_counter() - start
        return values, None, time.perf_counter() - start
    except (PlacementError, ValueError, FloatingPointError) as exc:
        return None, f"{type(exc).__name__}: {exc}", time.perf_counter() - start


def _timed_job(job: Tuple[Evaluator, Dict[str, Any]]):
    return _timed(*job)


def run_tuner(
    evaluator: Evaluator,
    space: ParamSpace,
    budget: int,
    config: TunerConfig = TunerConfig(),
    *,
    warm_start: Optional[Dict[str, Any]] = None,
    log_path: Optional[Path] = None,
) -> TunerResult:
    """Evaluate ``budget`` trials (the warm start first) and return the rank-0 set.

    With ``workers > 1`` suggestions are drawn in batches and evaluated in
    worker processes; the evaluator must then be picklable.
    """
    if budget < 1:
        raise ConfigError("budget must be >= 1")
    warm = dict(warm_start) if warm_start is not None else default_assignment(space)
    dists = space.distributions()
    study = _new_study(len(OBJECTIVES), _sampler(config.gamma_q, config.n_candidates, config.n_startup, config.seed))
    study.enqueue_trial(warm)
    trials: List[Trial] = []
    log_fh = open(log_path, "w", encoding="utf-8") if log_path is not None else None
    pool = ProcessPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        while len(trials) < budget:
            batch = min(config.workers, budget - len(trials))
            asked = [study.ask(dists) for _ in range(batch)]
            jobs = [(evaluator, dict(t.params)) for t in asked]
            results = list(pool.map(_timed_job, jobs)) if pool is not None else [_timed_job(j) for j in jobs]
            for opt_trial, (params_job, result) in zip(asked, zip(jobs, results)):
                values, error, seconds = result
                trial = Trial(len(trials), params_job[1], values, "complete" if values else "failed", error, seconds)
                if values is not None:
                    if len(values) != len(OBJECTIVES):
                        raise ConfigError(f"evaluator returned {len(values)} objectives, expected {len(OBJECTIVES)}")
                    study.tell(opt_trial, list(values))
                else:
                    study.tell(opt_trial, state=TrialState.FAIL)
                    logger.warning("trial %d failed: %s", trial.number, error)
                trials.append(trial)
                if log_fh is not None:
                    log_fh.write(json.dumps(trial.to_dict(), sort_keys=True) + "\n")
                    log_fh.flush()
                logger.debug("trial %d: %s", trial.number, trial.objectives)
    finally:
        if pool is not None:
            pool.shutdown()
        if log_fh is not None:
            log_fh.close()
    front = ParetoFront.from_trials(trials)
    logger.info("tuning finished: %d trials, %d failed, front of %d", len(trials), sum(not t.ok for t in trials), len(front))
    return TunerResult(trials, front)


def export_trials(trials: Sequence[Trial], json_path: Path, csv_path: Optional[Path] = None) -> None:
    """Write trials as JSON and optionally a flat CSV (one column per parameter and objective)."""
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(json.dumps([t.to_dict() for t in trials], indent=2, sort_keys=True), encoding="utf-8")
    if csv_path is not None:
        rows = []
        for t in trials:
            row: Dict[str, Any] = {"number": t.number, "status": t.status}
            row.update(t.params)
            for name, value in zip(OBJECTIVES, t.objectives or ()):
                row[name] = value
            rows.append(row)
        pd.DataFrame(rows).to_csv(csv_path, index=False)


# ---------------------------------------------------------------------------
# pipeline black box
# ---------------------------------------------------------------------------

def repair_effects(params: Dict[str, Any]) -> Dict[str, Any]:
    """Rescale low/mid filter effects proportionally when their sum exceeds 1."""
    out = dict(params)
    low, mid = out.get("low_filter_effect"), out.get("mid_filter_effect")
    if low is not None and mid is not None and low + mid > 1.0:
        total = low + mid
        out["low_filter_effect"] = low / total
        out["mid_filter_effect"] = mid / total
    return out


class PipelineEvaluator:
    """Runs the full flow on each design; objectives are (sum HPWL, max overflow, sum runtime)."""

    def __init__(self, bundles: Sequence[DesignBundle], base: RunConfig, cache_dir: Optional[Path] = None) -> None:
        if not bundles:
            raise ConfigError("PipelineEvaluator needs at least one design")
        self.bundles = list(bundles)
        self.base = base
        self.cache_dir = cache_dir

    def config_for(self, params: Mapping[str, Any]) -> RunConfig:
        return self.base.with_overrides(repair_effects(dict(params)))

    def __call__(self, params: Dict[str, Any]) -> Tuple[float, float, float]:
        config = self.config_for(params)
        cache = ResultCache(self.cache_dir) if self.cache_dir is not None else None
        total_hpwl, worst_overflow, runtime = 0.0, 0.0, 0.0
        for bundle in self.bundles:
            result = evaluate(bundle, config, cache)
            total_hpwl += float(result["hpwl"])
            worst_overflow = max(worst_overflow, float(result["overflow"]))
            runtime += float(result["runtime"])
        return total_hpwl, worst_overflow, runtime
