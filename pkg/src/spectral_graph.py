from __future__ import annotations

"""Sparse signed graphs and the polynomial graph filters applied to placements.

Graph signals are ``(N, C)`` arrays (``C = 2`` for x/y coordinates). Every
filter here is evaluated by repeated sparse matrix products; the dense
eigendecomposition helpers at the bottom exist only as test oracles.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, GraphError
from .netlist import Netlist

logger = logging.getLogger(__name__)

MAX_NET_DEGREE = 100
ORACLE_MAX_NODES = 2000


@dataclass(frozen=True, eq=False)
class SignedGraph:
    """Symmetric weighted graph; weights may be negative, no stored self-edges."""

    adjacency: sp.csr_matrix
    fixed: np.ndarray
    virtual: np.ndarray

    @classmethod
    def from_edges(
        cls,
        num_nodes: int,
        rows: np.ndarray,
        cols: np.ndarray,
        weights: np.ndarray,
        *,
        fixed: Optional[np.ndarray] = None,
        virtual: Optional[np.ndarray] = None,
    ) -> "SignedGraph":
        """Merge parallel edges by summation and symmetrise."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        weights = np.asarray(weights, dtype=float)
        if not np.all(np.isfinite(weights)):
            raise GraphError("edge weights must be finite")
        keep = rows != cols
        rows, cols, weights = rows[keep], cols[keep], weights[keep]
        adj = sp.coo_matrix(
            (np.concatenate([weights, weights]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
            shape=(num_nodes, num_nodes),
        ).tocsr()
        adj.sum_duplicates()
        adj.eliminate_zeros()
        fixed = np.zeros(num_nodes, dtype=bool) if fixed is None else np.asarray(fixed, dtype=bool)
        virtual = np.zeros(num_nodes, dtype=bool) if virtual is None else np.asarray(virtual, dtype=bool)
        return cls(adj, fixed, virtual)

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def num_edges(self) -> int:
        return int(sp.triu(self.adjacency, k=1).nnz)

    def edges(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Each undirected edge once, as ``(i, j, w)`` with ``i < j``."""
        upper = sp.triu(self.adjacency, k=1).tocoo()
        return upper.row.astype(np.int64), upper.col.astype(np.int64), upper.data.astype(float)

    def abs_degree(self) -> np.ndarray:
        return np.asarray(abs(self.adjacency).sum(axis=1)).ravel()


@dataclass(frozen=True)
class FilterBand:
    sigma: float
    k: int
    alpha: float


@dataclass(frozen=True)
class BandFilterSpec:
    """Three augmented-adjacency powers blended by ``alpha``.

    The band names are labels only; every band is a power of a
    normalised adjacency with self-loops.
    """

    low: FilterBand = FilterBand(4.0, 4, 0.2)
    mid: FilterBand = FilterBand(4.0, 2, 0.7)
    high: FilterBand = FilterBand(2.0, 2, 0.1)

    def __post_init__(self) -> None:
        total = 0.0
        for label, band in self.bands():
            if band.sigma < 0 or not np.isfinite(band.sigma):
                raise ConfigError(f"{label} band sigma must be >= 0, got {band.sigma}")
            if isinstance(band.k, bool) or int(band.k) != band.k or band.k < 1:
                raise ConfigError(f"{label} band power k must be an integer >= 1, got {band.k}")
            if band.alpha < 0:
                raise ConfigError(f"{label} band weight must be >= 0, got {band.alpha}")
            total += band.alpha
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"band weights must sum to 1, got {total}")

    @classmethod
    def from_effects(
        cls,
        low: Tuple[float, int],
        mid: Tuple[float, int],
        high: Tuple[float, int],
        low_effect: float,
        mid_effect: float,
    ) -> "BandFilterSpec":
        """Build from (sigma, k) pairs; the high weight is ``1 - low - mid``."""
        if low_effect < 0 or mid_effect < 0 or low_effect + mid_effect > 1.0 + 1e-12:
            raise ConfigError(
                f"filter effects must be >= 0 with low + mid <= 1, got {low_effect} + {mid_effect}"
            )
        high_effect = max(0.0, 1.0 - low_effect - mid_effect)
        return cls(
            FilterBand(float(low[0]), int(low[1]), float(low_effect)),
            FilterBand(float(mid[0]), int(mid[1]), float(mid_effect)),
            FilterBand(float(high[0]), int(high[1]), high_effect),
        )

    def bands(self) -> List[Tuple[str, FilterBand]]:
        return [("low", self.low), ("mid", self.mid), ("high", self.high)]


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def clique_pairs(
    net_start: np.ndarray,
    pin_node: np.ndarray,
    net_weight: np.ndarray,
    max_degree: int = MAX_NET_DEGREE,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unmerged clique edges ``weight * 2/p`` for every net with 2 <= p <= max_degree.

    Pairs whose two pins land on the same node are dropped.
    """
    degree = np.diff(net_start)
    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    wts: List[np.ndarray] = []
    for p in np.unique(degree):
        if p < 2 or p > max_degree:
            continue
        nets = np.flatnonzero(degree == p)
        nodes = pin_node[net_start[nets][:, None] + np.arange(p)]
        a, b = np.triu_indices(int(p), k=1)
        rows.append(nodes[:, a].ravel())
        cols.append(nodes[:, b].ravel())
        wts.append(np.repeat(net_weight[nets] * (2.0 / p), a.size))
    if not rows:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0)
    r, c, w = np.concatenate(rows), np.concatenate(cols), np.concatenate(wts)
    keep = r != c
    return r[keep], c[keep], w[keep]


def build_instance_graph(
    netlist: Netlist,
    net_model: str = "clique",
    max_degree: int = MAX_NET_DEGREE,
    *,
    pin_node: Optional[np.ndarray] = None,
    num_nodes: Optional[int] = None,
    fixed: Optional[np.ndarray] = None,
) -> SignedGraph:
    """Unsigned instance graph of the netlist.

    ``pin_node``/``num_nodes``/``fixed`` re-route pins onto extra nodes (used
    by macro pin expansion); by default each pin maps to its instance.
    """
    if net_model != "clique":
        raise ConfigError(f"unsupported net model {net_model!r}; only 'clique' is available")
    pin_node = netlist.pin_instance if pin_node is None else np.asarray(pin_node, dtype=np.int64)
    n = netlist.num_instances if num_nodes is None else num_nodes
    r, c, w = clique_pairs(netlist.net_start, pin_node, netlist.net_weight, max_degree)
    skipped = int(np.sum(netlist.net_degree > max_degree))
    if skipped:
        logger.debug("skipped %d nets above degree %d", skipped, max_degree)
    return SignedGraph.from_edges(n, r, c, w, fixed=netlist.fixed_mask if fixed is None else fixed)


def dump_edges(graph: SignedGraph, path: Path | str) -> None:
    """Write ``i j w`` lines (``i < j``) for diffing."""
    i, j, w = graph.edges()
    order = np.lexsort((j, i))
    lines = [f"{a} {b} {x:.17g}" for a, b, x in zip(i[order], j[order], w[order])]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def _as_matrix(signal: np.ndarray) -> Tuple[np.ndarray, bool]:
    signal = np.asarray(signal, dtype=float)
    if signal.ndim == 1:
        return signal[:, None], True
    return signal, False


def smoothness(graph: SignedGraph, signal: np.ndarray) -> np.ndarray:
    """Laplacian quadratic form per channel: sum over edges of w (g_j - g_i)^2."""
    g, _ = _as_matrix(signal)
    i, j, w = graph.edges()
    diff = g[j] - g[i]
    return (w[:, None] * diff * diff).sum(axis=0)


def zero_crossings(graph: SignedGraph, channel: np.ndarray) -> int:
    g = np.asarray(channel, dtype=float).ravel()
    i, j, _ = graph.edges()
    return int(np.count_nonzero(g[i] * g[j] < 0))


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

def augmented_adjacency(graph: SignedGraph, sigma: float) -> sp.csr_matrix:
    """``D^-1/2 (A + sigma I) D^-1/2`` with ``D`` the row sums of ``|A| + sigma I``."""
    if sigma < 0:
        raise ConfigError(f"sigma must be >= 0, got {sigma}")
    degree = graph.abs_degree() + sigma
    if np.any(degree <= 0):
        node = int(np.flatnonzero(degree <= 0)[0])
        raise GraphError(f"node {node} has zero degree; use sigma > 0 to add self-loops")
    scale = sp.diags(1.0 / np.sqrt(degree))
    eye = sp.identity(graph.num_nodes, format="csr")
    return (scale @ (graph.adjacency + sigma * eye) @ scale).tocsr()


def apply_augmented_adjacency(graph: SignedGraph, sigma: float, k: int, signal: np.ndarray) -> np.ndarray:
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise ConfigError(f"power k must be an integer >= 1, got {k}")
    g, flat = _as_matrix(signal)
    op = augmented_adjacency(graph, sigma)
    out = g.copy()
    for _ in range(int(k)):
        out = op @ out
    return out[:, 0] if flat else out


def apply_band_filter(graph: SignedGraph, spec: BandFilterSpec, signal: np.ndarray) -> np.ndarray:
    """``sum_b alpha_b * A_sigma_b^k_b g``; bands sharing sigma reuse powers."""
    g, flat = _as_matrix(signal)
    active = [band for _, band in spec.bands() if band.alpha != 0.0]
    by_sigma: Dict[float, List[FilterBand]] = {}
    for band in active:
        by_sigma.setdefault(band.sigma, []).append(band)
    out = np.zeros_like(g)
    for sigma, bands in by_sigma.items():
        op = augmented_adjacency(graph, sigma)
        power, current = 0, g.copy()
        for band in sorted(bands, key=lambda b: b.k):
            while power < band.k:
                current = op @ current
                power += 1
            out += band.alpha * current
    return out[:, 0] if flat else out


def signed_laplacian(graph: SignedGraph) -> sp.csr_matrix:
    """``L = D - A`` with signed degrees, so ``L @ 1 = 0``."""
    degree = np.asarray(graph.adjacency.sum(axis=1)).ravel()
    return (sp.diags(degree) - graph.adjacency).tocsr()


def gershgorin_upper(laplacian: sp.spmatrix | np.ndarray) -> float:
    """``max_i (L_ii + sum_{j != i} |L_ij|)``, an upper bound on the top eigenvalue."""
    L = sp.csr_matrix(laplacian)
    if L.shape[0] == 0:
        return 0.0
    diag = L.diagonal()
    off = np.asarray(abs(L).sum(axis=1)).ravel() - np.abs(diag)
    return float(np.max(diag + off))


# ---------------------------------------------------------------------------
# dense oracles (tests and small-graph diagnostics)
# ---------------------------------------------------------------------------

def normalized_laplacian(graph: SignedGraph, sigma: float = 0.0) -> sp.csr_matrix:
    """``I - augmented_adjacency(graph, sigma)``; its eigenbasis diagonalises the band filter."""
    return (sp.identity(graph.num_nodes, format="csr") - augmented_adjacency(graph, sigma)).tocsr()


@dataclass
class GFTResult:
    eigenvalues: np.ndarray
    basis: np.ndarray
    coefficients: np.ndarray

    def inverse(self, coefficients: Optional[np.ndarray] = None) -> np.ndarray:
        c = self.coefficients if coefficients is None else coefficients
        return self.basis @ c


def _guard(n: int) -> None:
    if n > ORACLE_MAX_NODES:
        raise GraphError(f"dense oracle limited to {ORACLE_MAX_NODES} nodes, got {n}")


def gft_oracle(
    graph: SignedGraph,
    signal: np.ndarray,
    *,
    laplacian: str = "combinatorial",
    sigma: float = 0.0,
) -> GFTResult:
    """Graph Fourier transform by dense eigendecomposition of the chosen Laplacian."""
    _guard(graph.num_nodes)
    if laplacian == "combinatorial":
        L = signed_laplacian(graph)
    elif laplacian == "normalized":
        L = normalized_laplacian(graph, sigma)
    else:
        raise ConfigError(f"unknown laplacian {laplacian!r}")
    lam, U = np.linalg.eigh(L.toarray())
    g = np.asarray(signal, dtype=float)
    return GFTResult(lam, U, U.T @ g)


def dense_filter_oracle(
    laplacian: sp.spmatrix | np.ndarray,
    response: Callable[[np.ndarray], np.ndarray],
    signal: np.ndarray,
) -> np.ndarray:
    """``U h(Lambda) U^T g`` for a symmetric Laplacian."""
    L = laplacian.toarray() if sp.issparse(laplacian) else np.asarray(laplacian, dtype=float)
    _guard(L.shape[0])
    lam, U = np.linalg.eigh(L)
    g, flat = _as_matrix(signal)
    out = U @ (response(lam)[:, None] * (U.T @ g))
    return out[:, 0] if flat else out
