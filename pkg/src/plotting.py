from __future__ import annotations

"""SVG renders: placements, schedule heat maps, sweeps, traces and tuning fronts.

All figures go through :func:`save_svg`, which fixes the SVG id salt and drops
the date so identical inputs give identical bytes.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from matplotlib.collections import PatchCollection  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .netlist import BinGrid, InstanceKind, Netlist  # noqa: E402
from .placer import PlacementTrace  # noqa: E402

logger = logging.getLogger(__name__)

plt.rcParams["svg.hashsalt"] = "gsp-placer"
plt.rcParams["svg.fonttype"] = "none"

FIXED_COLOR = "tab:red"
MOVABLE_COLOR = "tab:blue"

Rect = Tuple[float, float, float, float]


def save_svg(fig: plt.Figure, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.debug("wrote %s", path)
    return path


def placement_shapes(netlist: Netlist, positions: np.ndarray) -> Dict[str, List[Rect]]:
    """Rectangles to draw, grouped as ``fixed`` (macros), ``io`` (points) and ``movable``."""
    positions = netlist.check_positions(positions)
    shapes: Dict[str, List[Rect]] = {"fixed": [], "io": [], "movable": []}
    for i, inst in enumerate(netlist.instances):
        x, y = float(positions[i, 0]), float(positions[i, 1])
        rect = (x, y, inst.width, inst.height)
        if inst.kind is InstanceKind.IO_PIN and inst.area == 0:
            shapes["io"].append(rect)
        elif inst.kind.is_fixed:
            shapes["fixed"].append(rect)
        else:
            shapes["movable"].append(rect)
    return shapes


def placement_figure(netlist: Netlist, positions: np.ndarray, title: Optional[str] = None) -> plt.Figure:
    """Fixed macros and IO pins in red, movable instances in blue, region outline in black."""
    r = netlist.region
    shapes = placement_shapes(netlist, positions)
    fig, ax = plt.subplots(figsize=(6, 6 * r.height / r.width if r.width else 6))
    ax.add_patch(Rectangle((r.xmin, r.ymin), r.width, r.height, fill=False, edgecolor="black", linewidth=1.0))
    for group, color, alpha in (("fixed", FIXED_COLOR, 0.6), ("movable", MOVABLE_COLOR, 0.5)):
        if shapes[group]:
            patches = [Rectangle((x, y), w, h) for x, y, w, h in shapes[group]]
            ax.add_collection(PatchCollection(patches, facecolor=color, edgecolor=color, linewidth=0.2, alpha=alpha))
    if shapes["io"]:
        io = np.array([(x, y) for x, y, _, _ in shapes["io"]])
        ax.scatter(io[:, 0], io[:, 1], s=4, c=FIXED_COLOR, marker="s")
    pad = 0.02 * max(r.width, r.height)
    ax.set_xlim(r.xmin - pad, r.xmax + pad)
    ax.set_ylim(r.ymin - pad, r.ymax + pad)
    ax.set_aspect("equal")
    ax.set_title(title or netlist.name)
    fig.tight_layout()
    return fig


def plot_placement(netlist: Netlist, positions: np.ndarray, path: Path | str, title: Optional[str] = None) -> Path:
    return save_svg(placement_figure(netlist, positions, title), path)


def snapshot_writer(netlist: Netlist, directory: Path | str):
    """Placer callback writing ``iter_XXXXX.svg`` renders into ``directory``."""
    directory = Path(directory)

    def _write(iteration: int, positions: np.ndarray, trace: PlacementTrace) -> None:
        hp = trace.hpwl[-1] if trace.hpwl else trace.initial_hpwl
        plot_placement(netlist, positions, directory / f"iter_{iteration:05d}.svg", f"{netlist.name} iter {iteration} HPWL {hp:.4g}")

    return _write


def _heatmap(ax: plt.Axes, values: np.ndarray, grid: BinGrid, vmax: Optional[float] = None):
    r = grid.region
    return ax.imshow(
        values.T, origin="lower", extent=(r.xmin, r.xmax, r.ymin, r.ymax),
        cmap="viridis", vmin=0.0, vmax=vmax, interpolation="nearest",
    )


def plot_density(values: np.ndarray, grid: BinGrid, path: Path | str, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(5, 4.5))
    im = _heatmap(ax, values, grid)
    fig.colorbar(im, ax=ax)
    ax.set_title(title)
    fig.tight_layout()
    return save_svg(fig, path)


def plot_schedule_frames(
    frames: Sequence[Tuple[int, str, float, np.ndarray]],
    grid: BinGrid,
    path: Path | str,
    title: str = "",
) -> Path:
    """Row of heat maps, one per ``(t, name, value, density)`` frame, on a shared color scale."""
    n = max(len(frames), 1)
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.4), squeeze=False)
    vmax = max((float(f[3].max()) for f in frames), default=1.0) or 1.0
    for ax, (t, name, value, density) in zip(axes[0], frames):
        _heatmap(ax, density, grid, vmax)
        ax.set_title(f"t={t} {name}={value:.3g}", fontsize=9)
        ax.set_xticks([])
        ax.set_yticks([])
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return save_svg(fig, path)


def plot_density_sweep(table: pd.DataFrame, path: Path | str) -> Path:
    """HPWL versus target density, one line per flow."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for flow, rows in table.groupby("flow", sort=True):
        rows = rows.sort_values("target_density")
        ax.plot(rows["target_density"], rows["hpwl"], marker="o", label=str(flow))
    ax.set_xlabel("target density")
    ax.set_ylabel("HPWL")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return save_svg(fig, path)


def plot_trace(trace: Dict, path: Path | str, title: str = "") -> Path:
    """HPWL and overflow per iteration from a ``PlacementTrace.to_dict()``."""
    fig, ax = plt.subplots(figsize=(6, 4))
    its = np.arange(1, len(trace["hpwl"]) + 1)
    ax.plot(its, trace["hpwl"], color=MOVABLE_COLOR)
    ax.set_xlabel("iteration")
    ax.set_ylabel("HPWL", color=MOVABLE_COLOR)
    ax2 = ax.twinx()
    ax2.plot(its, trace["overflow"], color=FIXED_COLOR)
    ax2.set_ylabel("overflow", color=FIXED_COLOR)
    ax.set_title(title)
    fig.tight_layout()
    return save_svg(fig, path)


def plot_front(
    objectives: np.ndarray,
    path: Path | str,
    *,
    front: Optional[np.ndarray] = None,
    highlight: Optional[np.ndarray] = None,
    labels: Tuple[str, str] = ("hpwl", "overflow"),
) -> Path:
    """Scatter of all trials on the first two objectives, front and picks overlaid."""
    fig, ax = plt.subplots(figsize=(5, 4))
    pts = np.atleast_2d(np.asarray(objectives, dtype=float))
    if pts.size:
        ax.scatter(pts[:, 0], pts[:, 1], s=10, c="0.6", label="trials")
    if front is not None and len(front):
        f = np.asarray(front, dtype=float)
        ax.scatter(f[:, 0], f[:, 1], s=18, c=MOVABLE_COLOR, label="front")
    if highlight is not None and len(highlight):
        h = np.asarray(highlight, dtype=float)
        ax.scatter(h[:, 0], h[:, 1], s=60, facecolors="none", edgecolors=FIXED_COLOR, label="distilled")
    ax.set_xlabel(labels[0])
    ax.set_ylabel(labels[1])
    ax.legend()
    fig.tight_layout()
    return save_svg(fig, path)
