from __future__ import annotations

"""Electrostatic density model: smoothed charge map, Neumann Poisson solve, field.

Conventions: the source is ``rho - mean(rho)``, ``laplacian(phi) = -source / eps``
with zero normal derivative on the region boundary, and ``E = grad(phi)`` so the
density gradient of instance ``k`` is ``a_k * E(center_k)``.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import fft

from .errors import ConfigError
from .macro_schedule import ScheduleSpec, fixed_macro_density
from .netlist import BinGrid, DensityGrid, Netlist, accumulate_rects

logger = logging.getLogger(__name__)

MIN_GRID = 8


@dataclass(frozen=True, eq=False)
class PoissonSolution:
    source: np.ndarray
    phi: np.ndarray
    field_x: np.ndarray
    field_y: np.ndarray
    bin_area: float

    @property
    def energy(self) -> float:
        """``0.5 * sum(source * phi) * bin_area``."""
        return float(0.5 * np.sum(self.source * self.phi) * self.bin_area)


def _check_grid(grid: BinGrid) -> None:
    if grid.nx < MIN_GRID or grid.ny < MIN_GRID:
        raise ConfigError(f"density grid must be at least {MIN_GRID}x{MIN_GRID}, got {grid.nx}x{grid.ny}")


def movable_density(netlist: Netlist, positions: np.ndarray, grid: BinGrid) -> np.ndarray:
    """Smooth box kernel for movable instances.

    Each rectangle is dilated to at least one bin per axis (density scaled to
    keep its area) and shifted back inside the region.
    """
    positions = netlist.check_positions(positions)
    mov = netlist.movable_mask & (netlist.areas > 0)
    out = np.zeros((grid.nx, grid.ny))
    if not mov.any():
        return out
    r = grid.region
    size = netlist.sizes[mov]
    center = positions[mov] + 0.5 * size
    dil = np.maximum(size, [grid.bin_w, grid.bin_h])
    dil = np.minimum(dil, [r.width, r.height])
    lo = center - 0.5 * dil
    lo[:, 0] = np.clip(lo[:, 0], r.xmin, r.xmax - dil[:, 0])
    lo[:, 1] = np.clip(lo[:, 1], r.ymin, r.ymax - dil[:, 1])
    scale = netlist.areas[mov] / (dil[:, 0] * dil[:, 1])
    accumulate_rects(grid, lo[:, 0], lo[:, 1], lo[:, 0] + dil[:, 0], lo[:, 1] + dil[:, 1], scale, out)
    return out / grid.bin_area


def smoothed_density(
    netlist: Netlist,
    positions: np.ndarray,
    grid: BinGrid,
    schedule: Optional[ScheduleSpec],
    t: float,
    *,
    target_density: float = 1.0,
    fixed_density: Optional[np.ndarray] = None,
) -> DensityGrid:
    """Movable smooth-kernel density plus scheduled fixed-macro density.

    Fixed macros carry amplitude ``target_density``; ``schedule=None`` uses hard
    footprints. ``fixed_density`` short-circuits the macro term when cached.
    """
    _check_grid(grid)
    density = movable_density(netlist, positions, grid)
    if fixed_density is None:
        fixed_density = fixed_macro_density(netlist, grid, schedule, t, target_density)
    return DensityGrid(grid, density + fixed_density, netlist.movable_area)


def _omega(n: int, length: float) -> np.ndarray:
    return np.pi * np.arange(n) / length


def _sine_synthesis(coeff: np.ndarray, axis: int) -> np.ndarray:
    """``sum_{u>=1} coeff_u sin(pi u (i + 1/2) / N)`` along ``axis`` via DST-III."""
    coeff = np.moveaxis(coeff, axis, 0)
    shifted = np.zeros_like(coeff)
    shifted[:-1] = 0.5 * coeff[1:]
    return np.moveaxis(fft.dst(shifted, type=3, axis=0), 0, axis)


def poisson_solve(
    density: np.ndarray,
    grid: BinGrid,
    target_density: float = 1.0,
    epsilon: float = 1.0,
) -> PoissonSolution:
    """Spectral Neumann solve on bin centers.

    ``phi_hat = src_hat / (eps (w_u^2 + w_v^2))`` with ``w_u = pi u / Lx`` and
    ``phi_hat[0, 0] = 0``; the field is obtained by spectral differentiation.
    """
    _check_grid(grid)
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be > 0, got {epsilon}")
    rho = np.asarray(density, dtype=float)
    if rho.shape != (grid.nx, grid.ny):
        raise ConfigError(f"density shape {rho.shape} does not match grid {grid.nx}x{grid.ny}")
    src = rho - target_density
    src = src - src.mean()

    wu = _omega(grid.nx, grid.region.width)
    wv = _omega(grid.ny, grid.region.height)
    denom = epsilon * (wu[:, None] ** 2 + wv[None, :] ** 2)
    denom[0, 0] = 1.0
    phi_hat = fft.dctn(src, type=2, norm="ortho") / denom
    phi_hat[0, 0] = 0.0
    phi = fft.idctn(phi_hat, type=2, norm="ortho")

    cu = np.full(grid.nx, np.sqrt(2.0 / grid.nx))
    cu[0] = np.sqrt(1.0 / grid.nx)
    cv = np.full(grid.ny, np.sqrt(2.0 / grid.ny))
    cv[0] = np.sqrt(1.0 / grid.ny)
    ex = _sine_synthesis(-(wu * cu)[:, None] * phi_hat, axis=0)
    ex = fft.idct(ex, type=2, norm="ortho", axis=1)
    ey = _sine_synthesis(-(wv * cv)[None, :] * phi_hat, axis=1)
    ey = fft.idct(ey, type=2, norm="ortho", axis=0)
    return PoissonSolution(src, phi, ex, ey, grid.bin_area)


def spectral_laplacian(values: np.ndarray, grid: BinGrid) -> np.ndarray:
    """Laplacian of a bin-center field using the solver's cosine symbols."""
    wu = _omega(grid.nx, grid.region.width)
    wv = _omega(grid.ny, grid.region.height)
    hat = fft.dctn(np.asarray(values, dtype=float), type=2, norm="ortho")
    return fft.idctn(-(wu[:, None] ** 2 + wv[None, :] ** 2) * hat, type=2, norm="ortho")


def interpolate_field(values: np.ndarray, grid: BinGrid, points: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of a bin-center field, clamped at the outer centers."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    r = grid.region
    fx = np.clip((points[:, 0] - r.xmin) / grid.bin_w - 0.5, 0.0, grid.nx - 1)
    fy = np.clip((points[:, 1] - r.ymin) / grid.bin_h - 0.5, 0.0, grid.ny - 1)
    i0 = np.minimum(np.floor(fx).astype(np.int64), grid.nx - 2)
    j0 = np.minimum(np.floor(fy).astype(np.int64), grid.ny - 2)
    tx = fx - i0
    ty = fy - j0
    return (
        values[i0, j0] * (1 - tx) * (1 - ty)
        + values[i0 + 1, j0] * tx * (1 - ty)
        + values[i0, j0 + 1] * (1 - tx) * ty
        + values[i0 + 1, j0 + 1] * tx * ty
    )


def density_gradient(solution: PoissonSolution, grid: BinGrid, netlist: Netlist, positions: np.ndarray) -> np.ndarray:
    """``a_k * E(center_k)`` for movable instances, zero rows for fixed ones."""
    grad = np.zeros((netlist.num_instances, 2))
    mov = netlist.movable_mask & (netlist.areas > 0)
    if not mov.any():
        return grad
    centers = netlist.centers(positions)[mov]
    a = netlist.areas[mov]
    grad[mov, 0] = a * interpolate_field(solution.field_x, grid, centers)
    grad[mov, 1] = a * interpolate_field(solution.field_y, grid, centers)
    return grad
