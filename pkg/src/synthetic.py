from __future__ import annotations

"""Deterministic synthetic macro-heavy designs for desk-scale runs."""

import logging
from dataclasses import asdict, dataclass
from typing import List, Optional, Tuple

import numpy as np

from .bookshelf import DesignBundle, default_bins
from .errors import ConfigError
from .netlist import Instance, InstanceKind, Net, Netlist, Pin, PlacementRegion

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator knobs.

    Parameters
    ----------
    num_cells, num_macros:
        Movable standard cells and fixed macros.
    macro_size_range:
        Macro side length as a fraction of the region side, drawn uniformly.
    mean_net_degree:
        Mean of the ``1 + geometric`` net degree distribution (> 2 pins on average
        keeps cliques meaningful; must be >= 2).
    clustering:
        Probability that a net draws all its cells from one cluster.
    utilization:
        Cell area over free (non-macro) area; used when ``region_size`` is unset.
    num_io:
        Fixed zero-area pins spread along the region boundary.
    """

    num_cells: int = 500
    num_macros: int = 4
    macro_size_range: Tuple[float, float] = (0.08, 0.18)
    mean_net_degree: float = 3.0
    clustering: float = 0.7
    utilization: float = 0.5
    region_size: Optional[Tuple[float, float]] = None
    num_io: int = 0
    cluster_size: int = 25
    cell_height: float = 1.0
    cell_width_range: Tuple[int, int] = (1, 4)
    nets_per_cell: float = 1.0
    macro_pin_sites: int = 4
    central_macro: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_cells < 0 or self.num_macros < 0 or self.num_io < 0:
            raise ConfigError("synthetic counts must be >= 0")
        lo, hi = self.macro_size_range
        if not (0.0 < lo <= hi < 1.0):
            raise ConfigError(f"macro_size_range must lie in (0, 1), got {self.macro_size_range}")
        if self.mean_net_degree < 2.0:
            raise ConfigError("mean_net_degree must be >= 2")
        if not 0.0 <= self.clustering <= 1.0:
            raise ConfigError("clustering must lie in [0, 1]")
        if not 0.0 < self.utilization < 1.0:
            raise ConfigError("utilization must lie in (0, 1)")
        if self.region_size is not None and min(self.region_size) <= 0:
            raise ConfigError("region_size must be positive")

    def describe(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}


def _grid_slots(count: int) -> List[Tuple[float, float]]:
    """Fractional slot centers of a near-square grid with ``count`` cells."""
    cols = int(np.ceil(np.sqrt(count)))
    rows = int(np.ceil(count / cols))
    return [((c + 0.5) / cols, (r + 0.5) / rows) for r in range(rows) for c in range(cols)][:count]


def generate_synthetic(spec: SyntheticSpec) -> DesignBundle:
    rng = np.random.default_rng(spec.seed)
    lo, hi = spec.macro_size_range
    macro_frac = rng.uniform(lo, hi, size=(spec.num_macros, 2))
    w_lo, w_hi = spec.cell_width_range
    cell_w = rng.integers(w_lo, w_hi + 1, size=spec.num_cells).astype(float)
    cell_area = float(cell_w.sum() * spec.cell_height)

    if spec.region_size is not None:
        width, height = map(float, spec.region_size)
    else:
        free = 1.0 - float(np.prod(macro_frac, axis=1).sum())
        if free <= 0:
            raise ConfigError("macros cover the whole region")
        side = np.sqrt(cell_area / spec.utilization / free) if cell_area > 0 else 0.0
        width = height = float(max(side, 10.0 * spec.cell_height))
    macro_size = macro_frac * np.array([width, height])
    if float(np.prod(macro_size, axis=1).sum()) > width * height:
        raise ConfigError("infeasible synthetic spec: total macro area exceeds region area")

    bins = default_bins(spec.num_cells)
    region = PlacementRegion(0.0, 0.0, width, height, bins, bins)
    instances: List[Instance] = []

    # cells start uniformly inside the region
    for i in range(spec.num_cells):
        w = cell_w[i]
        x = rng.uniform(0.0, max(width - w, 0.0))
        y = rng.uniform(0.0, max(height - spec.cell_height, 0.0))
        instances.append(Instance(f"c{i}", w, spec.cell_height, InstanceKind.MOVABLE_CELL, x, y))

    # macros on a jittered grid
    slots = _grid_slots(spec.num_macros)
    if spec.central_macro and spec.num_macros == 1:
        slots = [(0.5, 0.5)]
    cols = int(np.ceil(np.sqrt(max(spec.num_macros, 1))))
    jitter = 0.0 if spec.central_macro else 0.25 / cols
    macro_ids: List[int] = []
    for j, (fx, fy) in enumerate(slots):
        mw, mh = macro_size[j]
        cx = (fx + rng.uniform(-jitter, jitter)) * width
        cy = (fy + rng.uniform(-jitter, jitter)) * height
        x = float(np.clip(cx - 0.5 * mw, 0.0, width - mw))
        y = float(np.clip(cy - 0.5 * mh, 0.0, height - mh))
        macro_ids.append(len(instances))
        instances.append(Instance(f"m{j}", float(mw), float(mh), InstanceKind.FIXED_MACRO, x, y))

    io_ids: List[int] = []
    for k in range(spec.num_io):
        t = (k + 0.5) / spec.num_io * 4.0
        side, frac = int(t), t - int(t)
        x, y = [(frac * width, 0.0), (width, frac * height), ((1 - frac) * width, height), (0.0, (1 - frac) * height)][side]
        io_ids.append(len(instances))
        instances.append(Instance(f"p{k}", 0.0, 0.0, InstanceKind.IO_PIN, x, y))

    nets = _draw_nets(rng, spec, cell_w, macro_ids, io_ids, instances)
    netlist = Netlist(tuple(instances), tuple(nets), region, f"synth_c{spec.num_cells}_m{spec.num_macros}_s{spec.seed}")
    logger.debug("generated %s with %d nets", netlist.name, netlist.num_nets)
    return DesignBundle(netlist, netlist.positions.copy(), {"kind": "synthetic", **{k: str(v) for k, v in spec.describe().items()}})


def _draw_nets(
    rng: np.random.Generator,
    spec: SyntheticSpec,
    cell_w: np.ndarray,
    macro_ids: List[int],
    io_ids: List[int],
    instances: List[Instance],
) -> List[Net]:
    n = spec.num_cells
    if n == 0:
        return []
    num_clusters = max(1, int(round(n / spec.cluster_size)))
    cluster_of = rng.integers(0, num_clusters, size=n)
    members = [np.flatnonzero(cluster_of == c) for c in range(num_clusters)]
    p = 1.0 / (spec.mean_net_degree - 1.0)
    num_nets = max(1, int(round(spec.nets_per_cell * n)))
    side = spec.macro_pin_sites
    # fraction of nets touching a macro or an IO pin
    p_macro = min(0.5, 0.05 * len(macro_ids))
    p_io = min(0.5, 0.02 * len(io_ids))

    nets: List[Net] = []
    for e in range(num_nets):
        degree = int(1 + rng.geometric(p))
        pins: List[Pin] = []
        if macro_ids and degree > 1 and rng.random() < p_macro:
            m = macro_ids[int(rng.integers(len(macro_ids)))]
            mw, mh = instances[m].width, instances[m].height
            edge = int(rng.integers(4))
            slot = (int(rng.integers(side)) + 0.5) / side
            dx, dy = [(slot * mw, 0.0), (mw, slot * mh), (slot * mw, mh), (0.0, slot * mh)][edge]
            pins.append(Pin(m, dx, dy))
        if io_ids and degree - len(pins) > 1 and rng.random() < p_io:
            pins.append(Pin(io_ids[int(rng.integers(len(io_ids)))], 0.0, 0.0))
        need = min(degree - len(pins), n)
        if need <= 0:
            need = 1
        if rng.random() < spec.clustering:
            pool = members[int(cluster_of[rng.integers(n)])]
            if pool.size < need:
                pool = np.arange(n)
        else:
            pool = np.arange(n)
        chosen = rng.choice(pool, size=need, replace=False)
        for c in chosen:
            pins.append(Pin(int(c), 0.5 * cell_w[c], 0.5 * spec.cell_height))
        nets.append(Net(f"n{e}", tuple(pins)))
    return nets
