from __future__ import annotations

"""Run configuration: one flat set of keys shared by the CLI, TOML files and the tuner."""

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

try:
    import tomllib
except ImportError:
    import toml as tomllib

from .area_hint import HintConfig
from .errors import ConfigError
from .gsp_init import InitConfig
from .macro_schedule import ScheduleSpec
from .placer import PlacerConfig
from .spectral_graph import BandFilterSpec

SECTIONS: Dict[str, tuple] = {
    "init": (
        "low_filter_sigma", "mid_filter_sigma", "high_filter_sigma",
        "low_filter_k", "mid_filter_k", "high_filter_k",
        "low_filter_effect", "mid_filter_effect",
        "init_window", "init_rescale", "max_net_degree",
    ),
    "refine": (
        "refine_iteration", "refine_num_bin_xy", "detection_ratio", "bin_capacity",
        "refine_relaxation", "refine_filter_k", "logistic_slope", "candidate_policy",
        "refine_hint_gain",
    ),
    "schedule": (
        "schedule_model", "schedule_iteration", "sigma_factor", "k_factor",
        "eta_r0", "eta_r1", "beta_min", "beta_max", "smoothstep_alpha0", "smoothstep_alpha1",
    ),
    "placer": (
        "target_density", "density_weight", "gamma", "GP_learning_rate", "GP_wirelength",
        "RePlAce_ref_hpwl", "RePlAce_LOWER_PCOF", "RePlAce_UPPER_PCOF",
        "stop_overflow", "max_iterations", "num_bins", "epsilon", "log_interval",
    ),
    "run": ("seed", "skip_init", "skip_refine", "skip_schedule", "snapshot_interval"),
}


@dataclass(frozen=True)
class RunConfig:
    # GSP-based initialization
    low_filter_sigma: float = 4.0
    mid_filter_sigma: float = 4.0
    high_filter_sigma: float = 2.0
    low_filter_k: int = 4
    mid_filter_k: int = 2
    high_filter_k: int = 2
    low_filter_effect: float = 0.2
    mid_filter_effect: float = 0.7
    init_window: float = 1.0
    init_rescale: str = "bbox-affine"
    max_net_degree: int = 100
    # area-hint refinement
    refine_iteration: int = 3
    refine_num_bin_xy: int = 32
    detection_ratio: float = 0.1
    bin_capacity: Optional[float] = None
    refine_relaxation: float = 0.5
    refine_filter_k: int = 2
    logistic_slope: float = 4.0
    candidate_policy: str = "center-inside"
    refine_hint_gain: float = 32.0
    # macro schedule
    schedule_model: str = "exp-restoration"
    schedule_iteration: int = 300
    sigma_factor: float = 0.05
    k_factor: float = 2.0
    eta_r0: float = 0.05
    eta_r1: float = 0.95
    beta_min: float = 0.2
    beta_max: float = 1.0
    smoothstep_alpha0: float = 0.3
    smoothstep_alpha1: float = 0.7
    # global placement
    target_density: float = 0.9
    density_weight: float = 8e-5
    gamma: float = 1.0
    GP_learning_rate: float = 0.5
    GP_wirelength: str = "WA"
    RePlAce_ref_hpwl: float = 0.0
    RePlAce_LOWER_PCOF: float = 0.95
    RePlAce_UPPER_PCOF: float = 1.05
    stop_overflow: float = 0.1
    max_iterations: int = 1000
    num_bins: int = 0
    epsilon: float = 1.0
    log_interval: int = 50
    # run
    seed: int = 0
    skip_init: bool = False
    skip_refine: bool = False
    skip_schedule: bool = False
    snapshot_interval: int = 0

    def __post_init__(self) -> None:
        for f in fields(self):
            _check_type(f.name, f.type, getattr(self, f.name))
        if self.num_bins < 0:
            raise ConfigError("num_bins must be >= 0 (0 selects the design's grid)")
        # builders validate their own invariants
        self.init_config()
        self.hint_config()
        self.schedule_spec()
        self.placer_config()

    # -- builders -------------------------------------------------------------
    def init_config(self) -> InitConfig:
        bands = BandFilterSpec.from_effects(
            (self.low_filter_sigma, self.low_filter_k),
            (self.mid_filter_sigma, self.mid_filter_k),
            (self.high_filter_sigma, self.high_filter_k),
            self.low_filter_effect,
            self.mid_filter_effect,
        )
        return InitConfig(bands, self.seed, self.init_window, self.init_rescale, self.max_net_degree)

    def hint_config(self) -> HintConfig:
        return HintConfig(
            iterations=0 if self.skip_refine else self.refine_iteration,
            relaxation=self.refine_relaxation,
            num_bins_x=self.refine_num_bin_xy,
            num_bins_y=self.refine_num_bin_xy,
            detection_ratio=self.detection_ratio,
            capacity=self.bin_capacity,
            target_density=self.target_density,
            slope=self.logistic_slope,
            filter_k=self.refine_filter_k,
            candidate_policy=self.candidate_policy,
            hint_gain=self.refine_hint_gain,
            max_net_degree=self.max_net_degree,
        )

    def schedule_spec(self) -> Optional[ScheduleSpec]:
        """``None`` when scheduling is skipped (hard macro footprints)."""
        spec = ScheduleSpec(
            model=self.schedule_model,
            horizon=self.schedule_iteration,
            r0=self.eta_r0,
            r1=self.eta_r1,
            beta_min=self.beta_min,
            beta_max=self.beta_max,
            alpha0=self.smoothstep_alpha0,
            alpha1=self.smoothstep_alpha1,
            sigma_factor=self.sigma_factor,
            k_factor=self.k_factor,
        )
        return None if self.skip_schedule else spec

    def placer_config(self) -> PlacerConfig:
        bins = self.num_bins or None
        return PlacerConfig(
            target_density=self.target_density,
            density_weight=self.density_weight,
            gamma=self.gamma,
            learning_rate=self.GP_learning_rate,
            wirelength=self.GP_wirelength,
            ref_hpwl=self.RePlAce_ref_hpwl,
            lower_pcof=self.RePlAce_LOWER_PCOF,
            upper_pcof=self.RePlAce_UPPER_PCOF,
            max_iterations=self.max_iterations,
            stop_overflow=self.stop_overflow,
            num_bins_x=bins,
            num_bins_y=bins,
            epsilon=self.epsilon,
            log_interval=self.log_interval,
        )

    # -- identity ---------------------------------------------------------------
    def with_overrides(self, overrides: Mapping[str, Any]) -> "RunConfig":
        clean = {k: v for k, v in overrides.items() if v is not None}
        unknown = sorted(set(clean) - _FIELD_NAMES)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        return replace(self, **{k: _coerce(k, v) for k, v in clean.items()})

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def config_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


_FIELD_NAMES = frozenset(f.name for f in fields(RunConfig))
_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _check_type(name: str, kind: str, value: Any) -> None:
    ok = {
        "bool": lambda v: isinstance(v, bool),
        "int": lambda v: isinstance(v, int) and not isinstance(v, bool),
        "float": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
        "str": lambda v: isinstance(v, str),
        "Optional[float]": lambda v: v is None or (isinstance(v, (int, float)) and not isinstance(v, bool)),
    }[kind](value)
    if not ok:
        raise ConfigError(f"config key {name} expects {kind}, got {type(value).__name__} {value!r}")


def _coerce(name: str, value: Any) -> Any:
    """Integers are accepted for real-valued keys and stored as floats."""
    kind = _FIELD_TYPES[name]
    _check_type(name, kind, value)
    if kind in ("float", "Optional[float]") and value is not None:
        return float(value)
    return value


def _flatten(table: Mapping[str, Any], origin: str) -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for key, value in table.items():
        if isinstance(value, dict):
            if key not in SECTIONS:
                raise ConfigError(f"{origin}: unknown config section [{key}]")
            for sub, sub_value in value.items():
                if sub not in SECTIONS[key]:
                    raise ConfigError(f"{origin}: key {sub} does not belong in section [{key}]")
                flat[sub] = sub_value
        else:
            flat[key] = value
    return flat


def load_config(path: Optional[Path] = None) -> RunConfig:
    """Load a :class:`RunConfig` from TOML.

    If ``path`` is ``None`` the ``[tool.gsp_placer]`` table of ``pyproject.toml``
    in the working directory is used when present; a file that itself has a
    ``[tool.gsp_placer]`` table is read the same way.
    """
    explicit = path is not None
    path = Path(path) if explicit else Path("pyproject.toml")
    if not path.exists():
        if explicit:
            raise ConfigError(f"config file not found: {path}")
        return RunConfig()
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except Exception as exc:  # tomllib and toml raise different decode errors
        raise ConfigError(f"{path}: invalid TOML ({exc})") from exc
    if "tool" in data:
        data = data["tool"].get("gsp_placer", {})
    elif "project" in data:
        data = {}
    return RunConfig().with_overrides(_flatten(data, str(path)))
