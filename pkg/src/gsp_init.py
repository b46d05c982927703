from __future__ import annotations

"""Spectral initial placement: random sample, band filter, re-pin, rescale."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .netlist import Netlist
from .spectral_graph import MAX_NET_DEGREE, BandFilterSpec, apply_band_filter, build_instance_graph

logger = logging.getLogger(__name__)

RESCALE_MODES = ("bbox-affine", "none")


@dataclass(frozen=True)
class InitConfig:
    filter: BandFilterSpec = field(default_factory=BandFilterSpec)
    seed: int = 0
    window: float = 1.0
    rescale: str = "bbox-affine"
    max_net_degree: int = MAX_NET_DEGREE

    def __post_init__(self) -> None:
        if not 0.0 < self.window <= 1.0:
            raise ConfigError(f"sampling window must lie in (0, 1], got {self.window}")
        if self.rescale not in RESCALE_MODES:
            raise ConfigError(f"rescale mode must be one of {RESCALE_MODES}, got {self.rescale!r}")


def _window_box(netlist: Netlist, window: float) -> np.ndarray:
    """``[[xlo, ylo], [xhi, yhi]]`` of the sampling window centred in the region."""
    r = netlist.region
    cx, cy = r.center
    half = 0.5 * window * np.array([r.width, r.height])
    return np.array([[cx - half[0], cy - half[1]], [cx + half[0], cy + half[1]]])


def random_signal(netlist: Netlist, seed: int = 0, window: float = 1.0) -> np.ndarray:
    """Instance centers: movables i.i.d. uniform over the window, fixed rows pinned."""
    box = _window_box(netlist, window)
    rng = np.random.default_rng(seed)
    centers = netlist.centers(netlist.positions)
    movable = netlist.movable_mask
    centers[movable] = rng.uniform(box[0], box[1], size=(int(movable.sum()), 2))
    return centers


def _rescale_to_window(centers: np.ndarray, movable: np.ndarray, box: np.ndarray) -> np.ndarray:
    out = centers.copy()
    if not movable.any():
        return out
    pts = centers[movable]
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = hi - lo
    for axis in range(2):
        target = box[1, axis] - box[0, axis]
        if span[axis] <= 1e-12 * max(target, 1.0):
            logger.warning("movable coordinates coincide on axis %d; skipping rescale on that axis", axis)
            continue
        out[movable, axis] = box[0, axis] + (pts[:, axis] - lo[axis]) * (target / span[axis])
    return out


def gsp_initialize(netlist: Netlist, config: InitConfig = InitConfig()) -> np.ndarray:
    """Return lower-left positions after filtering a random sample.

    Fixed rows are copied from the netlist unchanged.
    """
    box = _window_box(netlist, config.window)
    signal = random_signal(netlist, config.seed, config.window)
    graph = build_instance_graph(netlist, "clique", config.max_net_degree)
    filtered = apply_band_filter(graph, config.filter, signal)

    fixed = netlist.fixed_mask
    filtered[fixed] = signal[fixed]
    if config.rescale == "bbox-affine":
        filtered = _rescale_to_window(filtered, netlist.movable_mask, box)

    positions = netlist.positions.copy()
    movable = netlist.movable_mask
    positions[movable] = netlist.lower_left(filtered)[movable]
    positions = netlist.clamp_to_region(positions)
    logger.debug("spectral init of %s: %d movable, seed %d", netlist.name, int(movable.sum()), config.seed)
    return positions
