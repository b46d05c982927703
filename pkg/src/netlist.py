from __future__ import annotations

"""Netlist/placement data model and the evaluation metrics built on it.

Positions are always stored as an ``(N, 2)`` float array of lower-left
corners, one row per instance; centers are derived on demand.
"""

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from .errors import ConfigError, NetlistError


class InstanceKind(str, Enum):
    MOVABLE_CELL = "movable-cell"
    MOVABLE_MACRO = "movable-macro"
    FIXED_MACRO = "fixed-macro"
    IO_PIN = "io-pin"

    @property
    def is_fixed(self) -> bool:
        return self in (InstanceKind.FIXED_MACRO, InstanceKind.IO_PIN)


@dataclass(frozen=True)
class Instance:
    """One placeable object; ``x, y`` is the loaded lower-left corner."""

    name: str
    width: float
    height: float
    kind: InstanceKind = InstanceKind.MOVABLE_CELL
    x: float = 0.0
    y: float = 0.0

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class Pin:
    """Net pin: owning instance index and offset from its lower-left corner."""

    instance: int
    dx: float = 0.0
    dy: float = 0.0


@dataclass(frozen=True)
class Net:
    name: str
    pins: Tuple[Pin, ...]
    weight: float = 1.0


@dataclass(frozen=True)
class PlacementRegion:
    xmin: float
    ymin: float
    xmax: float
    ymax: float
    num_bins_x: int = 32
    num_bins_y: int = 32

    def __post_init__(self) -> None:
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise NetlistError(
                f"empty placement region ({self.xmin}, {self.ymin}, {self.xmax}, {self.ymax})"
            )
        if self.num_bins_x < 1 or self.num_bins_y < 1:
            raise NetlistError(f"bin grid must be at least 1x1, got {self.num_bins_x}x{self.num_bins_y}")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Tuple[float, float]:
        return (0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))

    def bin_grid(self, nx: Optional[int] = None, ny: Optional[int] = None) -> "BinGrid":
        return BinGrid(self, nx or self.num_bins_x, ny or self.num_bins_y)


@dataclass(frozen=True)
class BinGrid:
    """Uniform bin tiling of a region (geometry only)."""

    region: PlacementRegion
    nx: int
    ny: int

    def __post_init__(self) -> None:
        if self.nx < 1 or self.ny < 1:
            raise NetlistError(f"bin grid must be at least 1x1, got {self.nx}x{self.ny}")

    @property
    def bin_w(self) -> float:
        return self.region.width / self.nx

    @property
    def bin_h(self) -> float:
        return self.region.height / self.ny

    @property
    def bin_area(self) -> float:
        return self.bin_w * self.bin_h

    @property
    def x_edges(self) -> np.ndarray:
        return self.region.xmin + self.bin_w * np.arange(self.nx + 1)

    @property
    def y_edges(self) -> np.ndarray:
        return self.region.ymin + self.bin_h * np.arange(self.ny + 1)

    @property
    def x_centers(self) -> np.ndarray:
        return self.region.xmin + self.bin_w * (np.arange(self.nx) + 0.5)

    @property
    def y_centers(self) -> np.ndarray:
        return self.region.ymin + self.bin_h * (np.arange(self.ny) + 0.5)

    def bin_of(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Bin indices of ``(M, 2)`` points, clipped into the grid."""
        ix = np.floor((points[:, 0] - self.region.xmin) / self.bin_w).astype(np.int64)
        iy = np.floor((points[:, 1] - self.region.ymin) / self.bin_h).astype(np.int64)
        return np.clip(ix, 0, self.nx - 1), np.clip(iy, 0, self.ny - 1)


@dataclass
class DensityGrid:
    """Per-bin occupancy ``density[ix, iy]`` (occupied area / bin area)."""

    grid: BinGrid
    density: np.ndarray
    movable_area: float = 0.0

    @property
    def total_area(self) -> float:
        return float(self.density.sum() * self.grid.bin_area)


@dataclass(frozen=True, eq=False)
class Netlist:
    """Immutable instances + nets + region, with cached array views."""

    instances: Tuple[Instance, ...]
    nets: Tuple[Net, ...]
    region: PlacementRegion
    name: str = "design"
    _names: Dict[str, int] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "instances", tuple(self.instances))
        object.__setattr__(self, "nets", tuple(self.nets))
        n = len(self.instances)
        for inst in self.instances:
            if inst.width < 0 or inst.height < 0:
                raise NetlistError(f"instance {inst.name} has negative size {inst.width}x{inst.height}")
        for net in self.nets:
            if not net.pins:
                raise NetlistError(f"net {net.name} has no pins")
            if not net.weight > 0:
                raise NetlistError(f"net {net.name} has non-positive weight {net.weight}")
            for pin in net.pins:
                if not 0 <= pin.instance < n:
                    raise NetlistError(f"net {net.name} references unknown instance {pin.instance}")
        self._names.update({inst.name: i for i, inst in enumerate(self.instances)})

    # -- sizes ---------------------------------------------------------------
    @property
    def num_instances(self) -> int:
        return len(self.instances)

    @property
    def num_nets(self) -> int:
        return len(self.nets)

    @cached_property
    def num_pins(self) -> int:
        return int(sum(len(net.pins) for net in self.nets))

    @cached_property
    def num_movable(self) -> int:
        return int(self.movable_mask.sum())

    def index_of(self, name: str) -> int:
        try:
            return self._names[name]
        except KeyError:
            raise NetlistError(f"unknown instance {name}") from None

    # -- instance arrays -----------------------------------------------------
    @cached_property
    def sizes(self) -> np.ndarray:
        return np.array([(i.width, i.height) for i in self.instances], dtype=float).reshape(-1, 2)

    @property
    def widths(self) -> np.ndarray:
        return self.sizes[:, 0]

    @property
    def heights(self) -> np.ndarray:
        return self.sizes[:, 1]

    @cached_property
    def areas(self) -> np.ndarray:
        return self.sizes[:, 0] * self.sizes[:, 1]

    @cached_property
    def kinds(self) -> Tuple[InstanceKind, ...]:
        return tuple(i.kind for i in self.instances)

    @cached_property
    def fixed_mask(self) -> np.ndarray:
        return np.array([k.is_fixed for k in self.kinds], dtype=bool)

    @cached_property
    def movable_mask(self) -> np.ndarray:
        return ~self.fixed_mask

    @cached_property
    def fixed_macro_ids(self) -> np.ndarray:
        return np.array([i for i, k in enumerate(self.kinds) if k is InstanceKind.FIXED_MACRO], dtype=np.int64)

    @cached_property
    def movable_area(self) -> float:
        return float(self.areas[self.movable_mask].sum())

    @cached_property
    def positions(self) -> np.ndarray:
        """Loaded lower-left corners."""
        return np.array([(i.x, i.y) for i in self.instances], dtype=float).reshape(-1, 2)

    # -- pin arrays (net-major CSR layout) -------------------------------------
    @cached_property
    def net_start(self) -> np.ndarray:
        degrees = np.array([len(net.pins) for net in self.nets], dtype=np.int64)
        return np.concatenate(([0], np.cumsum(degrees)))

    @property
    def net_degree(self) -> np.ndarray:
        return np.diff(self.net_start)

    @cached_property
    def pin_instance(self) -> np.ndarray:
        return np.array([p.instance for net in self.nets for p in net.pins], dtype=np.int64)

    @cached_property
    def pin_offset(self) -> np.ndarray:
        return np.array([(p.dx, p.dy) for net in self.nets for p in net.pins], dtype=float).reshape(-1, 2)

    @cached_property
    def pin_net(self) -> np.ndarray:
        return np.repeat(np.arange(self.num_nets, dtype=np.int64), self.net_degree)

    @cached_property
    def net_weight(self) -> np.ndarray:
        return np.array([net.weight for net in self.nets], dtype=float)

    @cached_property
    def pins_per_instance(self) -> np.ndarray:
        return np.bincount(self.pin_instance, minlength=self.num_instances)

    # -- coordinate helpers ----------------------------------------------------
    def check_positions(self, positions: np.ndarray) -> np.ndarray:
        positions = np.asarray(positions, dtype=float)
        if positions.shape != (self.num_instances, 2):
            raise NetlistError(
                f"positions must have shape ({self.num_instances}, 2), got {positions.shape}"
            )
        return positions

    def centers(self, positions: np.ndarray) -> np.ndarray:
        return self.check_positions(positions) + 0.5 * self.sizes

    def lower_left(self, centers: np.ndarray) -> np.ndarray:
        return np.asarray(centers, dtype=float) - 0.5 * self.sizes

    def pin_positions(self, positions: np.ndarray) -> np.ndarray:
        return self.check_positions(positions)[self.pin_instance] + self.pin_offset

    def clamp_to_region(self, positions: np.ndarray, *, movable_only: bool = True) -> np.ndarray:
        """Clamp lower-left corners so rectangles stay inside the region.

        Instances larger than the region are pinned to its lower-left edge.
        """
        positions = self.check_positions(positions).copy()
        r = self.region
        hi_x = np.maximum(r.xmax - self.widths, r.xmin)
        hi_y = np.maximum(r.ymax - self.heights, r.ymin)
        rows = self.movable_mask if movable_only else np.ones(self.num_instances, dtype=bool)
        positions[rows, 0] = np.clip(positions[rows, 0], r.xmin, hi_x[rows])
        positions[rows, 1] = np.clip(positions[rows, 1], r.ymin, hi_y[rows])
        return positions

    def clamp_centers(self, centers: np.ndarray) -> np.ndarray:
        """Clamp movable centers so rectangles stay inside the region; fixed rows untouched."""
        centers = np.array(centers, dtype=float)
        r = self.region
        half = 0.5 * self.sizes[self.movable_mask]
        lo = np.array([r.xmin, r.ymin]) + half
        hi = np.maximum(np.array([r.xmax, r.ymax]) - half, lo)
        centers[self.movable_mask] = np.clip(centers[self.movable_mask], lo, hi)
        return centers

    def fingerprint(self) -> str:
        """sha256 over geometry, kinds, pins and net weights."""
        h = hashlib.sha256()
        h.update(repr(tuple(self.region.__dict__.values())).encode("utf-8"))
        h.update("\n".join(i.name for i in self.instances).encode("utf-8"))
        h.update(",".join(k.value for k in self.kinds).encode("utf-8"))
        for arr in (self.sizes, self.positions, self.net_start, self.pin_instance, self.pin_offset, self.net_weight):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def make_netlist(
    instances: Iterable[Instance],
    nets: Iterable[Net],
    region: PlacementRegion,
    name: str = "design",
) -> Netlist:
    return Netlist(tuple(instances), tuple(nets), region, name)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def net_bboxes(netlist: Netlist, positions: np.ndarray) -> np.ndarray:
    """``(E, 4)`` array of per-net (xmin, xmax, ymin, ymax) pin bounds."""
    if netlist.num_nets == 0:
        return np.zeros((0, 4))
    pins = netlist.pin_positions(positions)
    starts = netlist.net_start[:-1]
    return np.stack(
        [
            np.minimum.reduceat(pins[:, 0], starts),
            np.maximum.reduceat(pins[:, 0], starts),
            np.minimum.reduceat(pins[:, 1], starts),
            np.maximum.reduceat(pins[:, 1], starts),
        ],
        axis=1,
    )


def hpwl(netlist: Netlist, positions: np.ndarray) -> float:
    """Net-weighted half-perimeter wirelength."""
    box = net_bboxes(netlist, positions)
    if box.size == 0:
        return 0.0
    per_net = (box[:, 1] - box[:, 0]) + (box[:, 3] - box[:, 2])
    return float(np.dot(netlist.net_weight, per_net))


def accumulate_rects(
    grid: BinGrid,
    x0: np.ndarray,
    y0: np.ndarray,
    x1: np.ndarray,
    y1: np.ndarray,
    weight: np.ndarray | float = 1.0,
    out: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Add ``weight * overlap area`` of each rectangle to every bin it touches.

    Rectangles are clipped to the region first. Returns accumulated area per
    bin (not divided by bin area).
    """
    out = np.zeros((grid.nx, grid.ny)) if out is None else out
    r = grid.region
    x0 = np.clip(np.asarray(x0, dtype=float), r.xmin, r.xmax)
    x1 = np.clip(np.asarray(x1, dtype=float), r.xmin, r.xmax)
    y0 = np.clip(np.asarray(y0, dtype=float), r.ymin, r.ymax)
    y1 = np.clip(np.asarray(y1, dtype=float), r.ymin, r.ymax)
    weight = np.broadcast_to(np.asarray(weight, dtype=float), x0.shape)
    keep = (x1 > x0) & (y1 > y0) & (weight != 0)
    if not np.any(keep):
        return out
    x0, x1, y0, y1, weight = x0[keep], x1[keep], y0[keep], y1[keep], weight[keep]

    bw, bh = grid.bin_w, grid.bin_h
    ix0 = np.clip(np.floor((x0 - r.xmin) / bw).astype(np.int64), 0, grid.nx - 1)
    ix1 = np.clip(np.ceil((x1 - r.xmin) / bw).astype(np.int64) - 1, ix0, grid.nx - 1)
    iy0 = np.clip(np.floor((y0 - r.ymin) / bh).astype(np.int64), 0, grid.ny - 1)
    iy1 = np.clip(np.ceil((y1 - r.ymin) / bh).astype(np.int64) - 1, iy0, grid.ny - 1)
    span_x = ix1 - ix0 + 1
    span_y = iy1 - iy0 + 1
    x_edges, y_edges = grid.x_edges, grid.y_edges

    small = (span_x <= 4) & (span_y <= 4)
    if np.any(small):
        s = np.flatnonzero(small)
        for ox in range(int(span_x[s].max())):
            ix = np.minimum(ix0[s] + ox, grid.nx - 1)
            ovx = np.minimum(x1[s], x_edges[ix + 1]) - np.maximum(x0[s], x_edges[ix])
            ovx = np.where(ox < span_x[s], np.maximum(ovx, 0.0), 0.0)
            for oy in range(int(span_y[s].max())):
                iy = np.minimum(iy0[s] + oy, grid.ny - 1)
                ovy = np.minimum(y1[s], y_edges[iy + 1]) - np.maximum(y0[s], y_edges[iy])
                ovy = np.where(oy < span_y[s], np.maximum(ovy, 0.0), 0.0)
                np.add.at(out, (ix, iy), weight[s] * ovx * ovy)
    for k in np.flatnonzero(~small):
        xs = slice(ix0[k], ix1[k] + 1)
        ys = slice(iy0[k], iy1[k] + 1)
        ovx = np.minimum(x1[k], x_edges[1:][xs]) - np.maximum(x0[k], x_edges[:-1][xs])
        ovy = np.minimum(y1[k], y_edges[1:][ys]) - np.maximum(y0[k], y_edges[:-1][ys])
        out[xs, ys] += weight[k] * np.outer(np.maximum(ovx, 0.0), np.maximum(ovy, 0.0))
    return out


def bin_density(
    netlist: Netlist,
    positions: np.ndarray,
    grid: Optional[BinGrid] = None,
    *,
    include: Optional[np.ndarray] = None,
) -> DensityGrid:
    """Exact rectangle-overlap occupancy of the selected instances.

    ``include`` is a boolean mask over instances (default: all).
    """
    grid = grid or netlist.region.bin_grid()
    positions = netlist.check_positions(positions)
    rows = np.ones(netlist.num_instances, dtype=bool) if include is None else np.asarray(include, dtype=bool)
    p = positions[rows]
    s = netlist.sizes[rows]
    acc = accumulate_rects(grid, p[:, 0], p[:, 1], p[:, 0] + s[:, 0], p[:, 1] + s[:, 1])
    return DensityGrid(grid, acc / grid.bin_area, netlist.movable_area)


def density_overflow(
    grid: DensityGrid,
    target_density: float,
    movable_area: Optional[float] = None,
) -> float:
    """Area above ``target_density`` normalised by total movable area.

    When there is no movable area the region area is the normaliser.
    """
    if not (np.isfinite(target_density) and 0.0 < target_density <= 1.0):
        raise ConfigError(f"target density must lie in (0, 1], got {target_density}")
    area = grid.movable_area if movable_area is None else movable_area
    if area <= 0:
        area = grid.grid.region.area
    excess = np.maximum(grid.density - target_density, 0.0).sum() * grid.grid.bin_area
    return float(excess / area)
