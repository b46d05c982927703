from __future__ import annotations

"""Electrostatics-based global placement with scheduled macro charges."""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .electrostatics import MIN_GRID, PoissonSolution, density_gradient, poisson_solve, smoothed_density
from .errors import ConfigError, DivergenceError
from .macro_schedule import ScheduleSpec, fixed_macro_density, schedule_parameter
from .netlist import BinGrid, DensityGrid, Netlist, accumulate_rects, bin_density, density_overflow, hpwl
from .wirelength import WIRELENGTH_MODELS, wirelength_and_grad

logger = logging.getLogger(__name__)

AUTO_REF_HPWL_FRACTION = 0.005
MAX_BACKTRACKS = 10


@dataclass(frozen=True)
class PlacerConfig:
    """Global placement knobs.

    Parameters
    ----------
    density_weight:
        Initial density weight factor; the starting lambda is this times the
        ratio of wirelength to density gradient norms. ``0`` disables density.
    gamma:
        WA/LSE smoothing base, multiplied by the bin size and an overflow term.
    ref_hpwl:
        HPWL change reference for the lambda update; ``0`` picks
        ``0.005 * HPWL`` of the starting placement.
    """

    target_density: float = 0.9
    density_weight: float = 8e-5
    gamma: float = 1.0
    learning_rate: float = 0.5
    wirelength: str = "WA"
    ref_hpwl: float = 0.0
    lower_pcof: float = 0.95
    upper_pcof: float = 1.05
    max_iterations: int = 1000
    stop_overflow: float = 0.1
    num_bins_x: Optional[int] = None
    num_bins_y: Optional[int] = None
    epsilon: float = 1.0
    precondition: bool = True
    max_step_bins: float = 2.0
    convergence_tol: float = 1e-4
    log_interval: int = 50

    def __post_init__(self) -> None:
        if not 0.0 < self.target_density <= 1.0:
            raise ConfigError(f"target density must lie in (0, 1], got {self.target_density}")
        if self.density_weight < 0:
            raise ConfigError("density_weight must be >= 0")
        if not self.gamma > 0:
            raise ConfigError("gamma must be > 0")
        if not self.learning_rate > 0:
            raise ConfigError("learning rate must be > 0")
        if self.wirelength not in WIRELENGTH_MODELS:
            raise ConfigError(f"wirelength model must be one of {WIRELENGTH_MODELS}, got {self.wirelength!r}")
        if self.ref_hpwl < 0:
            raise ConfigError("ref_hpwl must be >= 0")
        if not 0.0 < self.lower_pcof <= 1.0 <= self.upper_pcof:
            raise ConfigError("need 0 < LOWER_PCOF <= 1 <= UPPER_PCOF")
        if self.max_iterations < 0:
            raise ConfigError("max_iterations must be >= 0")
        if not 0.0 < self.stop_overflow < 1.0:
            raise ConfigError(f"stop overflow must lie in (0, 1), got {self.stop_overflow}")
        for n in (self.num_bins_x, self.num_bins_y):
            if n is not None and n < MIN_GRID:
                raise ConfigError(f"placer grid must be at least {MIN_GRID} bins per axis")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be > 0")

    def grid_for(self, netlist: Netlist) -> BinGrid:
        r = netlist.region
        nx = self.num_bins_x or max(MIN_GRID, r.num_bins_x)
        ny = self.num_bins_y or max(MIN_GRID, r.num_bins_y)
        return BinGrid(r, nx, ny)


@dataclass
class PlacementTrace:
    hpwl: List[float] = field(default_factory=list)
    overflow: List[float] = field(default_factory=list)
    density_weight: List[float] = field(default_factory=list)
    gamma: List[float] = field(default_factory=list)
    objective: List[float] = field(default_factory=list)
    step: List[float] = field(default_factory=list)
    schedule_name: str = ""
    schedule_value: List[float] = field(default_factory=list)
    initial_hpwl: float = 0.0
    initial_overflow: float = 0.0
    stop_reason: str = ""
    restarts: int = 0

    @property
    def iterations(self) -> int:
        return len(self.hpwl)

    def record(self, **values: float) -> None:
        for key, value in values.items():
            getattr(self, key).append(float(value))

    def to_dict(self) -> Dict:
        out = asdict(self)
        out["iterations"] = self.iterations
        return out


SnapshotCallback = Callable[[int, np.ndarray, PlacementTrace], None]


def fixed_occupancy(netlist: Netlist, grid: BinGrid) -> np.ndarray:
    """Exact fraction of each bin covered by fixed instances."""
    fixed = netlist.fixed_mask & (netlist.areas > 0)
    out = np.zeros((grid.nx, grid.ny))
    if fixed.any():
        p = netlist.positions[fixed]
        s = netlist.sizes[fixed]
        accumulate_rects(grid, p[:, 0], p[:, 1], p[:, 0] + s[:, 0], p[:, 1] + s[:, 1], 1.0, out)
    return out / grid.bin_area


def placement_overflow(
    netlist: Netlist,
    positions: np.ndarray,
    grid: BinGrid,
    target_density: float,
    *,
    fixed: Optional[np.ndarray] = None,
) -> float:
    """Overflow of exact movable occupancy plus ``target_density`` times fixed occupancy."""
    movable = bin_density(netlist, positions, grid, include=netlist.movable_mask).density
    if fixed is None:
        fixed = fixed_occupancy(netlist, grid)
    return density_overflow(DensityGrid(grid, movable + target_density * fixed, netlist.movable_area), target_density)


def wirelength_gamma(base: float, grid: BinGrid, overflow: float) -> float:
    """``base * bin size * 10^((20/9) ov - 11/9)`` with ``ov`` clamped to [0.1, 1]."""
    ov = min(max(overflow, 0.1), 1.0)
    return base * 0.5 * (grid.bin_w + grid.bin_h) * 10.0 ** ((20.0 / 9.0) * ov - 11.0 / 9.0)


def density_weight_factor(delta_hpwl: float, ref_hpwl: float, lower: float, upper: float) -> float:
    """``clamp(upper^(1 - dHPWL/ref), lower, upper)``."""
    exponent = float(np.clip(1.0 - delta_hpwl / ref_hpwl, -50.0, 50.0))
    return min(max(upper ** exponent, lower), upper)


class _Objective:
    """Evaluates ``W + lambda * D`` and its gradient on movable rows."""

    def __init__(self, netlist: Netlist, config: PlacerConfig, grid: BinGrid, schedule: Optional[ScheduleSpec]) -> None:
        self.netlist = netlist
        self.config = config
        self.grid = grid
        self.schedule = schedule
        self.movable = netlist.movable_mask
        self._fixed_cache: Dict[object, np.ndarray] = {}

    def fixed_density(self, t: int) -> np.ndarray:
        key = "snap" if self.schedule is None or self.schedule.is_snapped(t) else t
        if key not in self._fixed_cache:
            if len(self._fixed_cache) > 4:
                self._fixed_cache = {k: v for k, v in self._fixed_cache.items() if k == "snap"}
            self._fixed_cache[key] = fixed_macro_density(self.netlist, self.grid, self.schedule, t, self.config.target_density)
        return self._fixed_cache[key]

    def density_terms(self, positions: np.ndarray, t: int) -> Tuple[PoissonSolution, np.ndarray]:
        rho = smoothed_density(
            self.netlist, positions, self.grid, self.schedule, t,
            target_density=self.config.target_density, fixed_density=self.fixed_density(t),
        )
        sol = poisson_solve(rho.density, self.grid, self.config.target_density, self.config.epsilon)
        return sol, density_gradient(sol, self.grid, self.netlist, positions)

    def __call__(self, positions: np.ndarray, t: int, gamma: float, lam: float) -> Tuple[float, np.ndarray]:
        wl, wl_grad = wirelength_and_grad(self.netlist, positions, gamma, self.config.wirelength)
        if lam > 0:
            sol, d_grad = self.density_terms(positions, t)
            value = wl + lam * sol.energy
            grad = wl_grad + lam * d_grad
        else:
            value, grad = wl, wl_grad
        grad[~self.movable] = 0.0
        return value, grad


def _assemble(base: np.ndarray, movable: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = base.copy()
    out[movable] = x
    return out


def run_global_placement(
    netlist: Netlist,
    init_positions: np.ndarray,
    config: PlacerConfig = PlacerConfig(),
    schedule: Optional[ScheduleSpec] = None,
    *,
    callback: Optional[SnapshotCallback] = None,
    snapshot_interval: int = 0,
) -> Tuple[np.ndarray, PlacementTrace]:
    """Nesterov descent with backtracking on ``W + lambda * D``.

    ``schedule`` drives the fixed-macro charge for ``t < snap_iteration``;
    ``None`` uses hard footprints throughout. Returns final lower-left positions
    (fixed rows from the netlist) and the per-iteration trace.
    """
    grid = config.grid_for(netlist)
    movable = netlist.movable_mask
    base = netlist.positions.copy()
    positions = _assemble(base, movable, netlist.check_positions(init_positions)[movable])
    positions = netlist.clamp_to_region(positions)
    trace = PlacementTrace()
    if schedule is not None:
        trace.schedule_name = schedule_parameter(0, schedule)[0]
    fixed_occ = fixed_occupancy(netlist, grid)
    objective = _Objective(netlist, config, grid, schedule)
    use_density = config.density_weight > 0

    hpwl_prev = hpwl(netlist, positions)
    overflow = placement_overflow(netlist, positions, grid, config.target_density, fixed=fixed_occ)
    trace.initial_hpwl, trace.initial_overflow = hpwl_prev, overflow
    ref = config.ref_hpwl or max(AUTO_REF_HPWL_FRACTION * hpwl_prev, 1e-12)
    if use_density and overflow <= config.stop_overflow:
        trace.stop_reason = "overflow"
        logger.info("start placement already below overflow %.3f; nothing to do", config.stop_overflow)
        return positions, trace
    if not movable.any() or config.max_iterations == 0:
        trace.stop_reason = "no-work"
        return positions, trace

    gamma = wirelength_gamma(config.gamma, grid, overflow)
    lam = 0.0
    if use_density:
        _, wl_grad = wirelength_and_grad(netlist, positions, gamma, config.wirelength)
        _, d_grad = objective.density_terms(positions, 0)
        d_norm = float(np.abs(d_grad[movable]).sum())
        lam = config.density_weight * (float(np.abs(wl_grad[movable]).sum()) / d_norm if d_norm > 0 else 1.0)

    bin_size = np.array([grid.bin_w, grid.bin_h])
    max_step = config.max_step_bins * bin_size
    span = max(netlist.region.width, netlist.region.height)
    x = positions[movable].copy()
    x_prev = x.copy()
    a_prev = 1.0
    alpha = config.learning_rate
    pins = netlist.pins_per_instance[movable].astype(float)
    areas = netlist.areas[movable]

    for it in range(config.max_iterations):
        t = it
        a_k = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * a_prev * a_prev))
        y = x + ((a_prev - 1.0) / a_k) * (x - x_prev)
        y_full = netlist.clamp_to_region(_assemble(base, movable, y))
        y = y_full[movable]
        f_y, g_y = objective(y_full, t, gamma, lam)
        if not (np.isfinite(f_y) and np.all(np.isfinite(g_y))):
            raise DivergenceError(f"non-finite objective at iteration {it}", trace)
        g = g_y[movable]
        if config.precondition:
            g = g / np.maximum(pins / gamma + lam * areas / config.epsilon, 1e-12)[:, None]

        accepted = None
        step = min(config.learning_rate, 2.0 * alpha)
        for _ in range(MAX_BACKTRACKS):
            delta = np.clip(step * g, -max_step, max_step)
            cand = netlist.clamp_to_region(_assemble(base, movable, y - delta))
            f_c, _ = objective(cand, t, gamma, lam)
            if np.isfinite(f_c) and f_c <= f_y:
                accepted = cand
                break
            step *= 0.5

        if accepted is None:
            # momentum restart from the current iterate
            trace.restarts += 1
            x_prev = x.copy()
            a_prev = 1.0
            alpha = step
            x_new = x
            f_new = f_y
        else:
            alpha = step
            x_new = accepted[movable]
            f_new = f_c
            # y == x without momentum, and f_y is already the value there
            f_x = f_y if np.array_equal(y, x) else objective(_assemble(base, movable, x), t, gamma, lam)[0]
            if f_new > f_x:
                trace.restarts += 1
                a_prev = 1.0
                x_prev = x_new.copy()
            else:
                a_prev = a_k
                x_prev = x
        displacement = float(np.abs(x_new - x).max()) if x.size else 0.0
        x = x_new
        positions = _assemble(base, movable, x)

        cur_hpwl = hpwl(netlist, positions)
        overflow = placement_overflow(netlist, positions, grid, config.target_density, fixed=fixed_occ)
        sched_value = schedule_parameter(t, schedule)[1] if schedule is not None else float("nan")
        trace.record(
            hpwl=cur_hpwl, overflow=overflow, density_weight=lam, gamma=gamma,
            objective=f_new, step=alpha, schedule_value=sched_value,
        )
        if config.log_interval and it % config.log_interval == 0:
            logger.info(
                "iter %4d  HPWL %.6g  overflow %.4f  lambda %.3e  gamma %.4g  %s %.4g",
                it, cur_hpwl, overflow, lam, gamma, trace.schedule_name or "-", sched_value,
            )
        if callback is not None and snapshot_interval and it % snapshot_interval == 0:
            callback(it, positions, trace)

        if use_density:
            if overflow <= config.stop_overflow:
                trace.stop_reason = "overflow"
                break
            lam *= density_weight_factor(cur_hpwl - hpwl_prev, ref, config.lower_pcof, config.upper_pcof)
        elif displacement < config.convergence_tol * span:
            trace.stop_reason = "converged"
            break
        hpwl_prev = cur_hpwl
        gamma = wirelength_gamma(config.gamma, grid, overflow)
    else:
        trace.stop_reason = "max-iterations"

    logger.info(
        "placement of %s finished after %d iterations (%s): HPWL %.6g, overflow %.4f",
        netlist.name, trace.iterations, trace.stop_reason, trace.hpwl[-1] if trace.hpwl else trace.initial_hpwl,
        trace.overflow[-1] if trace.overflow else trace.initial_overflow,
    )
    return positions, trace
