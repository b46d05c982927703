from __future__ import annotations

"""Density-aware refinement of a spectral placement on a signed hint graph.

The hint graph extends the instance graph with

* one fixed node per distinct pin site of every fixed macro,
* one virtual node per fixed macro, tied to the instances it covers by
  negative (repulsive) edges,
* one virtual node per bin whose occupancy differs from capacity, tied to
  nearby movables by edges whose sign opposes the bin's overfill.

Each refinement step low-pass filters the current centers with
``(I - L_hint / lambda_up)^k``; negative-spectrum components are amplified,
which is what pushes cells out of macros and overfull bins.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .errors import ConfigError, NetlistError
from .netlist import BinGrid, DensityGrid, Netlist, bin_density
from .spectral_graph import (
    MAX_NET_DEGREE,
    SignedGraph,
    build_instance_graph,
    clique_pairs,
    gershgorin_upper,
    signed_laplacian,
)

logger = logging.getLogger(__name__)

CANDIDATE_POLICIES = ("center-inside", "overlap")

NODE_INSTANCE = 0
NODE_MACRO_PIN = 1
NODE_MACRO_VIRTUAL = 2
NODE_BIN_VIRTUAL = 3


@dataclass(frozen=True)
class HintConfig:
    iterations: int = 3
    relaxation: float = 0.5
    num_bins_x: int = 32
    num_bins_y: int = 32
    detection_ratio: float = 0.1
    capacity: Optional[float] = None
    target_density: float = 0.9
    slope: float = 4.0
    filter_k: int = 2
    candidate_policy: str = "center-inside"
    hint_gain: float = 32.0
    max_net_degree: int = MAX_NET_DEGREE

    def __post_init__(self) -> None:
        if self.iterations < 0:
            raise ConfigError("refine iterations must be >= 0")
        if not 0.0 <= self.relaxation <= 1.0:
            raise ConfigError(f"relaxation must lie in [0, 1], got {self.relaxation}")
        if self.num_bins_x < 1 or self.num_bins_y < 1:
            raise ConfigError("refine bin grid must be at least 1x1")
        if not 0.0 < self.detection_ratio <= 1.0:
            raise ConfigError(f"detection ratio must lie in (0, 1], got {self.detection_ratio}")
        if self.slope <= 0:
            raise ConfigError("logistic slope must be > 0")
        if isinstance(self.filter_k, bool) or int(self.filter_k) != self.filter_k or self.filter_k < 1:
            raise ConfigError(f"refinement filter power must be an integer >= 1, got {self.filter_k}")
        if self.candidate_policy not in CANDIDATE_POLICIES:
            raise ConfigError(f"candidate policy must be one of {CANDIDATE_POLICIES}")
        if not (np.isfinite(self.hint_gain) and self.hint_gain > 0):
            raise ConfigError(f"hint gain must be > 0, got {self.hint_gain}")

    @property
    def bin_capacity(self) -> float:
        return self.target_density if self.capacity is None else self.capacity

    @property
    def window(self) -> Tuple[int, int]:
        return (
            max(1, int(np.floor(self.detection_ratio * self.num_bins_x))),
            max(1, int(np.floor(self.detection_ratio * self.num_bins_y))),
        )


@dataclass(frozen=True)
class MacroPinExpansion:
    """Pin re-routing onto per-site fixed nodes of fixed macros."""

    pin_node: np.ndarray
    num_nodes: int
    site_positions: np.ndarray
    site_owner: np.ndarray

    @property
    def num_sites(self) -> int:
        return int(self.site_owner.size)


@dataclass(frozen=True, eq=False)
class HintGraph:
    graph: SignedGraph
    anchors: np.ndarray
    node_kind: np.ndarray
    node_owner: np.ndarray
    num_instances: int

    def full_signal(self, centers: np.ndarray) -> np.ndarray:
        return np.vstack([centers, self.anchors])

    def nodes_of(self, kind: int) -> np.ndarray:
        return np.flatnonzero(self.node_kind == kind)


# ---------------------------------------------------------------------------
# construction pieces
# ---------------------------------------------------------------------------

def expand_macro_pins(netlist: Netlist) -> MacroPinExpansion:
    """Give every distinct pin site of each fixed macro its own fixed node.

    A macro without pins keeps its own (center) node.
    """
    n = netlist.num_instances
    pin_node = netlist.pin_instance.copy()
    positions = netlist.positions
    sites, owners = [], []
    for m in netlist.fixed_macro_ids:
        pins = np.flatnonzero(netlist.pin_instance == m)
        if pins.size == 0:
            continue
        offsets, inverse = np.unique(netlist.pin_offset[pins], axis=0, return_inverse=True)
        base = n + len(sites)
        pin_node[pins] = base + inverse.ravel()
        sites.extend(positions[m] + offsets)
        owners.extend([m] * len(offsets))
    site_positions = np.array(sites, dtype=float).reshape(-1, 2)
    return MacroPinExpansion(pin_node, n + len(owners), site_positions, np.array(owners, dtype=np.int64))


def base_weights(graph: SignedGraph, num_instances: int) -> np.ndarray:
    """Mean |weight| of each instance's edges; isolated instances take the global mean."""
    adj = abs(graph.adjacency)[:num_instances]
    total = np.asarray(adj.sum(axis=1)).ravel()
    count = np.diff(adj.tocsr().indptr)
    i, j, w = graph.edges()
    fallback = float(np.abs(w).mean()) if w.size else 1.0
    return np.where(count > 0, total / np.maximum(count, 1), fallback)


def macro_repulsion_edges(
    center: np.ndarray,
    size: np.ndarray,
    centers: np.ndarray,
    weights: np.ndarray,
    candidates: np.ndarray,
    *,
    policy: str = "center-inside",
    sizes: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Negative edges from covered instances to a macro's virtual node.

    Returns ``(instance ids, weights)`` with ``w = -exp(-maxRatio) * base``.
    """
    w_m, h_m = float(size[0]), float(size[1])
    if w_m <= 0 or h_m <= 0:
        raise NetlistError(f"macro footprint must have positive size, got {w_m}x{h_m}")
    d = np.abs(centers - np.asarray(center, dtype=float))
    if policy == "center-inside":
        inside = (d[:, 0] <= 0.5 * w_m) & (d[:, 1] <= 0.5 * h_m)
    elif policy == "overlap":
        if sizes is None:
            raise ConfigError("overlap policy needs instance sizes")
        inside = (d[:, 0] < 0.5 * (w_m + sizes[:, 0])) & (d[:, 1] < 0.5 * (h_m + sizes[:, 1]))
    else:
        raise ConfigError(f"unknown candidate policy {policy!r}")
    idx = np.flatnonzero(inside & candidates)
    ratio = np.maximum(d[idx, 0] / (0.5 * w_m), d[idx, 1] / (0.5 * h_m))
    return idx, -np.exp(-ratio) * weights[idx]


def bin_phi(density: np.ndarray, capacity: float, slope: float) -> np.ndarray:
    """``2 sigmoid(slope (D - C)) - 1``: +1 overfull, -1 empty, 0 at capacity."""
    return 2.0 * expit(slope * (np.asarray(density, dtype=float) - capacity)) - 1.0


def bin_virtual_edges(
    density: DensityGrid,
    centers: np.ndarray,
    config: HintConfig,
    weights: np.ndarray,
    movable: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Signed edges between bins and the movables in their detection window.

    Returns ``(instance ids, flat bin ids, weights)``; zero weights are omitted.
    """
    grid = density.grid
    phi = bin_phi(density.density, config.bin_capacity, config.slope)
    ids = np.flatnonzero(movable)
    bx, by = grid.bin_of(centers[ids])
    n_x, n_y = config.window
    xc, yc = grid.x_centers, grid.y_centers
    half_w, half_h = 0.5 * grid.bin_w, 0.5 * grid.bin_h

    inst_l, bin_l, w_l = [], [], []
    for ox in range(-(n_x // 2), n_x - n_x // 2):
        tx = bx - ox
        for oy in range(-(n_y // 2), n_y - n_y // 2):
            ty = by - oy
            ok = (tx >= 0) & (tx < grid.nx) & (ty >= 0) & (ty < grid.ny)
            if not ok.any():
                continue
            i, gx, gy = ids[ok], tx[ok], ty[ok]
            p = phi[gx, gy]
            ratio = np.maximum(
                np.abs(centers[i, 0] - xc[gx]) / half_w,
                np.abs(centers[i, 1] - yc[gy]) / half_h,
            )
            w = -np.exp(-ratio) * p * weights[i]
            nz = w != 0
            inst_l.append(i[nz])
            bin_l.append((gx * grid.ny + gy)[nz])
            w_l.append(w[nz])
    if not inst_l:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0)
    return np.concatenate(inst_l), np.concatenate(bin_l), np.concatenate(w_l)


def build_hint_laplacian(
    netlist: Netlist,
    centers: np.ndarray,
    config: HintConfig,
    *,
    weights: Optional[np.ndarray] = None,
    expansion: Optional[MacroPinExpansion] = None,
) -> Tuple[HintGraph, sp.csr_matrix]:
    """Assemble the signed hint graph at ``centers`` and return it with ``L = D - A``."""
    n = netlist.num_instances
    centers = np.asarray(centers, dtype=float)
    expansion = expansion or expand_macro_pins(netlist)
    if weights is None:
        weights = base_weights(build_instance_graph(netlist, "clique", config.max_net_degree), n)

    rows, cols, wts = [], [], []
    r, c, w = clique_pairs(netlist.net_start, expansion.pin_node, netlist.net_weight, config.max_net_degree)
    rows.append(r)
    cols.append(c)
    wts.append(w)

    anchors = [expansion.site_positions]
    kinds = [np.full(n, NODE_INSTANCE), np.full(expansion.num_sites, NODE_MACRO_PIN)]
    owners = [np.arange(n), expansion.site_owner]
    next_node = expansion.num_nodes

    movable = netlist.movable_mask
    macros = netlist.fixed_macro_ids
    for m in macros:
        center = netlist.positions[m] + 0.5 * netlist.sizes[m]
        idx, w = macro_repulsion_edges(
            center, netlist.sizes[m], centers, weights, movable,
            policy=config.candidate_policy, sizes=netlist.sizes,
        )
        rows.append(idx)
        cols.append(np.full(idx.size, next_node))
        wts.append(config.hint_gain * w)
        anchors.append(center[None, :])
        next_node += 1
    kinds.append(np.full(macros.size, NODE_MACRO_VIRTUAL))
    owners.append(macros)

    grid = BinGrid(netlist.region, config.num_bins_x, config.num_bins_y)
    positions = netlist.positions.copy()
    positions[movable] = netlist.lower_left(centers)[movable]
    density = bin_density(netlist, positions, grid)
    inst, bins, w = bin_virtual_edges(density, centers, config, weights, movable)
    used, local = np.unique(bins, return_inverse=True)
    rows.append(inst)
    cols.append(next_node + local.ravel())
    wts.append(config.hint_gain * w)
    anchors.append(np.column_stack([grid.x_centers[used // grid.ny], grid.y_centers[used % grid.ny]]))
    kinds.append(np.full(used.size, NODE_BIN_VIRTUAL))
    owners.append(used)
    next_node += used.size

    node_kind = np.concatenate(kinds)
    fixed = np.ones(next_node, dtype=bool)
    fixed[:n] = netlist.fixed_mask
    virtual = np.isin(node_kind, (NODE_MACRO_VIRTUAL, NODE_BIN_VIRTUAL))
    graph = SignedGraph.from_edges(
        next_node, np.concatenate(rows), np.concatenate(cols), np.concatenate(wts), fixed=fixed, virtual=virtual
    )
    hint = HintGraph(graph, np.vstack(anchors).reshape(-1, 2), node_kind, np.concatenate(owners), n)
    return hint, signed_laplacian(graph)


# ---------------------------------------------------------------------------
# filtering
# ---------------------------------------------------------------------------

def refinement_response(lam: np.ndarray, lambda_up: float, k: int) -> np.ndarray:
    return (1.0 - np.asarray(lam, dtype=float) / lambda_up) ** k


def free_block_radius(laplacian: sp.spmatrix, free: np.ndarray) -> float:
    """``max_i (|L_ii| + sum_{j != i} |L_ij|)`` over the free rows and columns.

    Bounds ``|lambda|`` for every eigenvalue of ``L[free][:, free]``.
    """
    free = np.asarray(free, dtype=bool)
    if not free.any():
        return 0.0
    L = sp.csr_matrix(laplacian)[free][:, free]
    return float(np.max(np.asarray(abs(L).sum(axis=1)).ravel()))


def apply_refinement_filter(
    laplacian: sp.spmatrix,
    k: int,
    signal: np.ndarray,
    *,
    lambda_up: Optional[float] = None,
    pinned: Optional[np.ndarray] = None,
) -> np.ndarray:
    """``k`` applications of ``I - L / lambda_up`` (identity if ``lambda_up <= 0``).

    Rows flagged in ``pinned`` are reset to their input values after every
    application.
    """
    lam_up = gershgorin_upper(laplacian) if lambda_up is None else float(lambda_up)
    out = np.array(signal, dtype=float)
    if lam_up <= 0:
        return out
    L = sp.csr_matrix(laplacian)
    keep = None if pinned is None else np.asarray(pinned, dtype=bool)
    base = out[keep] if keep is not None else None
    for _ in range(int(k)):
        out = out - (L @ out) / lam_up
        if keep is not None:
            out[keep] = base
    return out


RefineCallback = Callable[[int, np.ndarray, np.ndarray, np.ndarray], None]


def refine(
    signal: np.ndarray,
    netlist: Netlist,
    config: HintConfig = HintConfig(),
    *,
    callback: Optional[RefineCallback] = None,
) -> np.ndarray:
    """Relaxed fixed-point refinement of instance centers.

    Each iteration rebuilds the hint graph from the current centers, filters
    the movable rows with every fixed, pin and virtual node held in place,
    blends with ``relaxation``, re-pins fixed rows and clamps to the region.
    The filter step is normalised by :func:`free_block_radius`, so repulsive
    modes grow by at most ``2**filter_k`` per iteration.
    """
    g0 = np.asarray(signal, dtype=float)
    g = g0.copy()
    if config.iterations == 0:
        return g
    n = netlist.num_instances
    expansion = expand_macro_pins(netlist)
    weights = base_weights(build_instance_graph(netlist, "clique", config.max_net_degree), n)
    fixed = netlist.fixed_mask
    gamma = config.relaxation
    for k in range(config.iterations):
        hint, L = build_hint_laplacian(netlist, g, config, weights=weights, expansion=expansion)
        pinned = hint.graph.fixed
        radius = free_block_radius(L, ~pinned)
        filtered = apply_refinement_filter(
            L, config.filter_k, hint.full_signal(g), lambda_up=radius, pinned=pinned
        )[:n]
        g_next = (1.0 - gamma) * g + gamma * filtered
        g_next[fixed] = g0[fixed]
        g_next = netlist.clamp_centers(g_next)
        logger.debug(
            "refine %d/%d: %d hint nodes, %d edges, radius %.4g, mean shift %.4g",
            k + 1, config.iterations, hint.graph.num_nodes, hint.graph.num_edges, radius,
            float(np.abs(g_next - g).mean()) if n else 0.0,
        )
        if callback is not None:
            callback(k, g, filtered, g_next)
        g = g_next
    return g
