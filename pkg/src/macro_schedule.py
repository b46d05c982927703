from __future__ import annotations

"""Iteration-dependent charge models for fixed macros.

Four models are available:

``gaussian-redistribution``
    Area-normalised, rectangularly truncated Gaussian whose width parameter
    eta shrinks over the schedule (charge spreads toward the footprint edges
    while the total stays ``w*h``).
``exp-restoration``, ``linear-restoration``, ``sigmoid-restoration``
    Bells equal to 1 at the center that grow toward a uniform footprint as the
    schedule advances.

From ``snap_iteration`` on every model is replaced by the exact footprint.
All contributions are multiplied by an amplitude (the placer passes the
target density).
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np
from scipy.special import erf, expit

from .errors import ConfigError
from .netlist import BinGrid, Netlist, accumulate_rects

logger = logging.getLogger(__name__)

MODELS = (
    "gaussian-redistribution",
    "exp-restoration",
    "linear-restoration",
    "sigmoid-restoration",
)

SNAP_FRACTION = 0.95
# smallest sigma for which exp(-tan^2(0.45 pi) / (2 sigma^2)) >= 0.99
SIGMA_CAP = math.tan(0.45 * math.pi) / math.sqrt(-2.0 * math.log(0.99))


@dataclass(frozen=True)
class ScheduleSpec:
    """Macro schedule parameters.

    Parameters
    ----------
    model:
        One of :data:`MODELS`.
    horizon:
        Schedule length ``T`` in placer iterations.
    r0, r1:
        Gaussian edge-decay endpoints (edge/center ratio), log-linear in t.
    beta_min, beta_max:
        Gaussian full-width-at-half-maximum endpoints (fraction of the
        footprint), linear in t.
    alpha0, alpha1:
        Smoothstep knots blending the two Gaussian schemes.
    """

    model: str = "exp-restoration"
    horizon: int = 300
    r0: float = 0.05
    r1: float = 0.95
    beta_min: float = 0.2
    beta_max: float = 1.0
    alpha0: float = 0.3
    alpha1: float = 0.7
    sigma_factor: float = 0.05
    k_factor: float = 2.0
    sigma_min: float = 1e-3
    sigma_cap: float = SIGMA_CAP
    k_min: float = 1e-3
    k_cap: float = 100.0
    supersample: int = 4

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ConfigError(f"schedule model must be one of {MODELS}, got {self.model!r}")
        if self.horizon < 1:
            raise ConfigError(f"schedule horizon must be >= 1, got {self.horizon}")
        if not (0.0 < self.r0 < 1.0 and 0.0 < self.r1 < 1.0):
            raise ConfigError(f"edge-decay endpoints must lie in (0, 1), got r0={self.r0}, r1={self.r1}")
        if not self.r0 < self.r1:
            raise ConfigError("edge-decay endpoints need r0 < r1")
        if not 0.0 < self.beta_min < self.beta_max:
            raise ConfigError("FWHM endpoints need 0 < beta_min < beta_max")
        if not 0.0 <= self.alpha0 < self.alpha1 <= 1.0:
            raise ConfigError("smoothstep knots need 0 <= alpha0 < alpha1 <= 1")
        if self.sigma_factor <= 0 or self.k_factor <= 0:
            raise ConfigError("sigma_factor and k_factor must be > 0")
        if not 0.0 < self.sigma_min < self.sigma_cap:
            raise ConfigError("need 0 < sigma_min < sigma_cap")
        if not 0.0 < self.k_min < self.k_cap:
            raise ConfigError("need 0 < k_min < k_cap")
        if self.supersample < 1:
            raise ConfigError("supersample must be >= 1")

    @property
    def snap_iteration(self) -> int:
        return int(math.ceil(SNAP_FRACTION * self.horizon))

    def is_snapped(self, t: int) -> bool:
        return t >= self.snap_iteration


@dataclass(frozen=True)
class MacroCharge:
    macro_id: int
    x0: float
    y0: float
    width: float
    height: float
    amplitude: float = 1.0

    @property
    def center(self) -> Tuple[float, float]:
        return self.x0 + 0.5 * self.width, self.y0 + 0.5 * self.height


def macro_charges(netlist: Netlist, amplitude: float = 1.0) -> List[MacroCharge]:
    pos = netlist.positions
    return [
        MacroCharge(int(m), float(pos[m, 0]), float(pos[m, 1]), float(netlist.widths[m]), float(netlist.heights[m]), amplitude)
        for m in netlist.fixed_macro_ids
    ]


# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------

def _alpha(t: float, horizon: int) -> float:
    if t < 0:
        raise ConfigError(f"schedule index must be >= 0, got {t}")
    return min(float(t) / horizon, 1.0)


def smoothstep(z: np.ndarray | float) -> np.ndarray | float:
    z = np.clip(z, 0.0, 1.0)
    return z * z * (3.0 - 2.0 * z)


def blend_weight(alpha: float, spec: ScheduleSpec) -> float:
    return float(smoothstep((alpha - spec.alpha0) / (spec.alpha1 - spec.alpha0)))


def eta_schedule(t: float, horizon: int, spec: ScheduleSpec) -> float:
    """Geometric blend of the edge-decay and FWHM Gaussian schemes."""
    alpha = _alpha(t, horizon)
    r = spec.r0 ** (1.0 - alpha) * spec.r1 ** alpha
    eta_a = math.sqrt(-2.0 * math.log(r))
    beta = spec.beta_min + alpha * (spec.beta_max - spec.beta_min)
    eta_b = math.sqrt(2.0 * math.log(2.0)) / beta
    w = blend_weight(alpha, spec)
    if w == 0.0:
        return eta_b
    return eta_b ** (1.0 - w) * eta_a ** w


def sigma_schedule(
    t: float,
    horizon: int,
    sigma_factor: float,
    sigma_min: float = 1e-3,
    sigma_cap: float = SIGMA_CAP,
) -> float:
    """``-sigma_factor * T * ln(1 - t/T)`` clamped to ``[sigma_min, sigma_cap]``."""
    alpha = _alpha(t, horizon)
    if alpha >= 1.0:
        return sigma_cap
    sigma = -sigma_factor * horizon * math.log1p(-alpha)
    return min(max(sigma, sigma_min), sigma_cap)


def k_schedule(
    t: float,
    horizon: int,
    k_factor: float,
    k_min: float = 1e-3,
    k_cap: float = 100.0,
) -> float:
    """``k_factor / tan(pi t / 2T)`` clamped to ``[k_min, k_cap]``."""
    alpha = _alpha(t, horizon)
    if alpha == 0.0:
        return k_cap
    k = k_factor * (1.0 + math.cos(math.pi * alpha)) / math.sin(math.pi * alpha)
    return min(max(k, k_min), k_cap)


def schedule_parameter(t: float, spec: ScheduleSpec) -> Tuple[str, float]:
    """Name and value of the model's scheduled parameter at iteration ``t``."""
    if spec.model == "gaussian-redistribution":
        return "eta", eta_schedule(t, spec.horizon, spec)
    if spec.model == "exp-restoration":
        return "sigma", sigma_schedule(t, spec.horizon, spec.sigma_factor, spec.sigma_min, spec.sigma_cap)
    return "k", k_schedule(t, spec.horizon, spec.k_factor, spec.k_min, spec.k_cap)


# ---------------------------------------------------------------------------
# density models in macro-local coordinates
# ---------------------------------------------------------------------------

def _inside(dx: np.ndarray, dy: np.ndarray, w: float, h: float, *, strict: bool = False) -> np.ndarray:
    if strict:
        return (np.abs(dx) < 0.5 * w) & (np.abs(dy) < 0.5 * h)
    return (np.abs(dx) <= 0.5 * w) & (np.abs(dy) <= 0.5 * h)


def gaussian_peak(eta: float) -> float:
    return 2.0 * eta * eta / (math.pi * math.erf(eta / math.sqrt(2.0)) ** 2)


def rho_gaussian(eta: float, dx, dy, w: float, h: float) -> np.ndarray:
    if eta <= 0:
        raise ConfigError(f"eta must be > 0, got {eta}")
    dx, dy = np.broadcast_arrays(np.asarray(dx, dtype=float), np.asarray(dy, dtype=float))
    val = gaussian_peak(eta) * np.exp(-2.0 * eta * eta * ((dx / w) ** 2 + (dy / h) ** 2))
    return np.where(_inside(dx, dy, w, h), val, 0.0)


def rho_exponential(sigma: float, dx, dy, w: float, h: float) -> np.ndarray:
    dx, dy = np.broadcast_arrays(np.asarray(dx, dtype=float), np.asarray(dy, dtype=float))
    inside = _inside(dx, dy, w, h, strict=True)
    tx = np.tan(np.pi * np.where(inside, dx / w, 0.0))
    ty = np.tan(np.pi * np.where(inside, dy / h, 0.0))
    return np.where(inside, np.exp(-(tx * tx + ty * ty) / (2.0 * sigma * sigma)), 0.0)


def _radius(dx: np.ndarray, dy: np.ndarray, w: float, h: float) -> np.ndarray:
    return np.sqrt(2.0 * ((dx / w) ** 2 + (dy / h) ** 2))


def rho_linear(k: float, dx, dy, w: float, h: float) -> np.ndarray:
    dx, dy = np.broadcast_arrays(np.asarray(dx, dtype=float), np.asarray(dy, dtype=float))
    val = np.maximum(1.0 - k * _radius(dx, dy, w, h), 0.0)
    return np.where(_inside(dx, dy, w, h), val, 0.0)


def rho_sigmoid(k: float, dx, dy, w: float, h: float) -> np.ndarray:
    dx, dy = np.broadcast_arrays(np.asarray(dx, dtype=float), np.asarray(dy, dtype=float))
    val = 2.0 * expit(-k * _radius(dx, dy, w, h))
    return np.where(_inside(dx, dy, w, h), val, 0.0)


_DENSITY = {
    "gaussian-redistribution": rho_gaussian,
    "exp-restoration": rho_exponential,
    "linear-restoration": rho_linear,
    "sigmoid-restoration": rho_sigmoid,
}


def model_density(spec: ScheduleSpec, t: float, dx, dy, w: float, h: float) -> np.ndarray:
    """Unscaled model value at local offsets ``(dx, dy)`` for iteration ``t``."""
    _, param = schedule_parameter(t, spec)
    return _DENSITY[spec.model](param, dx, dy, w, h)


# ---------------------------------------------------------------------------
# per-bin integration
# ---------------------------------------------------------------------------

def _clipped_intervals(edges: np.ndarray, lo: float, hi: float) -> Tuple[np.ndarray, np.ndarray]:
    return np.clip(edges[:-1], lo, hi), np.clip(edges[1:], lo, hi)


def _gaussian_axis(eta: float, a: np.ndarray, b: np.ndarray, c: float, w: float) -> np.ndarray:
    s = math.sqrt(2.0) * eta / w
    return (math.sqrt(math.pi) / (2.0 * s)) * (erf(s * (b - c)) - erf(s * (a - c)))


def macro_bin_contribution(
    charge: MacroCharge,
    t: float,
    grid: BinGrid,
    spec: ScheduleSpec,
) -> np.ndarray:
    """Per-bin density (integral over bin and footprint / bin area) of one macro."""
    out = np.zeros((grid.nx, grid.ny))
    x0, y0 = charge.x0, charge.y0
    x1, y1 = x0 + charge.width, y0 + charge.height
    if charge.width <= 0 or charge.height <= 0:
        return out
    if spec.is_snapped(t):
        accumulate_rects(grid, np.array([x0]), np.array([y0]), np.array([x1]), np.array([y1]), charge.amplitude, out)
        return out / grid.bin_area

    cx, cy = charge.center
    ax, bx = _clipped_intervals(grid.x_edges, x0, x1)
    ay, by = _clipped_intervals(grid.y_edges, y0, y1)
    if spec.model == "gaussian-redistribution":
        eta = eta_schedule(t, spec.horizon, spec)
        ix = _gaussian_axis(eta, ax, bx, cx, charge.width)
        iy = _gaussian_axis(eta, ay, by, cy, charge.height)
        out = gaussian_peak(eta) * np.outer(ix, iy)
    else:
        kx = np.flatnonzero(bx > ax)
        ky = np.flatnonzero(by > ay)
        if kx.size == 0 or ky.size == 0:
            return out
        s = spec.supersample
        frac = (np.arange(s) + 0.5) / s
        px = ax[kx, None] + frac[None, :] * (bx - ax)[kx, None]
        py = ay[ky, None] + frac[None, :] * (by - ay)[ky, None]
        vals = model_density(spec, t, px[:, :, None, None] - cx, py[None, None, :, :] - cy, charge.width, charge.height)
        mean = vals.mean(axis=(1, 3))
        out[np.ix_(kx, ky)] = mean * np.outer((bx - ax)[kx], (by - ay)[ky])
    return charge.amplitude * out / grid.bin_area


def fixed_macro_density(
    netlist: Netlist,
    grid: BinGrid,
    spec: Optional[ScheduleSpec],
    t: float,
    amplitude: float = 1.0,
) -> np.ndarray:
    """Sum of all fixed-macro contributions in macro-id order.

    ``spec=None`` gives the exact (unscheduled) footprints.
    """
    charges = macro_charges(netlist, amplitude)
    if spec is None:
        out = np.zeros((grid.nx, grid.ny))
        if charges:
            x0 = np.array([c.x0 for c in charges])
            y0 = np.array([c.y0 for c in charges])
            w = np.array([c.width for c in charges])
            h = np.array([c.height for c in charges])
            accumulate_rects(grid, x0, y0, x0 + w, y0 + h, amplitude, out)
        return out / grid.bin_area
    total = np.zeros((grid.nx, grid.ny))
    for charge in charges:
        total += macro_bin_contribution(charge, t, grid, spec)
    return total


def schedule_frames(
    netlist: Netlist,
    grid: BinGrid,
    spec: ScheduleSpec,
    iterations: Iterable[int],
    amplitude: float = 1.0,
) -> List[Tuple[int, str, float, np.ndarray]]:
    """``(t, parameter name, parameter value, density)`` for each requested iteration."""
    frames = []
    for t in iterations:
        name, value = schedule_parameter(t, spec)
        frames.append((int(t), name, value, fixed_macro_density(netlist, grid, spec, t, amplitude)))
    logger.debug("computed %d schedule frames for %s", len(frames), spec.model)
    return frames
