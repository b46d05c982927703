from __future__ import annotations

"""Read and write ISPD2005-style Bookshelf designs.

Byte format notes live in ``docs/BOOKSHELF_FORMAT.md``. Pin offsets in
``.nets`` are measured from the node center; internally they are stored
relative to the lower-left corner.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from .errors import BookshelfParseError, NetlistError
from .netlist import Instance, InstanceKind, Net, Netlist, Pin, PlacementRegion

logger = logging.getLogger(__name__)

MACRO_HEIGHT_FACTOR = 4.0
PL_DECIMALS = 6


@dataclass
class DesignBundle:
    """Netlist, its initial placement, and where it came from."""

    netlist: Netlist
    positions: np.ndarray
    source: Dict[str, str] = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.netlist.name


def _fmt(value: float) -> str:
    return repr(float(value))


def default_bins(num_movable: int) -> int:
    """Power-of-two bin count per axis, about one bin per movable object."""
    side = max(1.0, float(np.sqrt(max(num_movable, 1))))
    return int(np.clip(2 ** int(np.ceil(np.log2(side))), 16, 512))


def _records(path: Path) -> Iterator[Tuple[int, List[str]]]:
    """Yield ``(line number, tokens)``, skipping headers, comments and blanks."""
    if not path.is_file():
        raise BookshelfParseError(path, None, "missing file")
    with path.open("r", encoding="utf-8", errors="replace") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line or line.startswith("UCLA"):
                continue
            yield lineno, line.replace(":", " : ").split()


def _float(tok: str, path: Path, lineno: int) -> float:
    try:
        value = float(tok)
    except ValueError:
        raise BookshelfParseError(path, lineno, f"expected a number, got {tok!r}") from None
    if not np.isfinite(value):
        raise BookshelfParseError(path, lineno, f"non-finite number {tok!r}")
    return value


def _after_colon(tokens: List[str], path: Path, lineno: int) -> str:
    try:
        return tokens[tokens.index(":") + 1]
    except (ValueError, IndexError):
        raise BookshelfParseError(path, lineno, "expected 'key : value'") from None


def _read_aux(aux: Path) -> Dict[str, Path]:
    files: Dict[str, Path] = {}
    for lineno, tokens in _records(aux):
        if ":" not in tokens:
            raise BookshelfParseError(aux, lineno, "expected 'RowBasedPlacement : <files>'")
        for name in tokens[tokens.index(":") + 1:]:
            suffix = Path(name).suffix.lower().lstrip(".")
            if suffix not in {"nodes", "nets", "pl", "scl", "wts"}:
                raise BookshelfParseError(aux, lineno, f"unknown design file {name}")
            files[suffix] = aux.parent / name
    for required in ("nodes", "nets", "pl"):
        if required not in files:
            raise BookshelfParseError(aux, None, f"no .{required} file listed")
    return files


def _read_nodes(path: Path) -> Tuple[List[str], np.ndarray, List[str]]:
    names: List[str] = []
    sizes: List[Tuple[float, float]] = []
    flags: List[str] = []
    seen: Dict[str, int] = {}
    declared: Optional[int] = None
    for lineno, tokens in _records(path):
        head = tokens[0]
        if head in ("NumNodes", "NumTerminals"):
            if head == "NumNodes":
                declared = int(_float(_after_colon(tokens, path, lineno), path, lineno))
            continue
        if len(tokens) < 3:
            raise BookshelfParseError(path, lineno, "expected 'name width height [terminal]'")
        if head in seen:
            raise BookshelfParseError(path, lineno, f"node {head} declared twice (first at line {seen[head]})")
        w = _float(tokens[1], path, lineno)
        h = _float(tokens[2], path, lineno)
        if w < 0 or h < 0:
            raise BookshelfParseError(path, lineno, f"node {head} has negative size")
        seen[head] = lineno
        names.append(head)
        sizes.append((w, h))
        flags.append(tokens[3] if len(tokens) > 3 else "")
    if declared is not None and declared != len(names):
        logger.warning("%s declares %d nodes but lists %d", path, declared, len(names))
    return names, np.array(sizes, dtype=float).reshape(-1, 2), flags


def _read_pl(path: Path, index: Dict[str, int]) -> Tuple[Dict[int, Tuple[float, float]], set]:
    coords: Dict[int, Tuple[float, float]] = {}
    fixed: set = set()
    for lineno, tokens in _records(path):
        if len(tokens) < 3:
            raise BookshelfParseError(path, lineno, "expected 'name x y : orient'")
        name = tokens[0]
        if name not in index:
            raise BookshelfParseError(path, lineno, f"placement for undeclared node {name}")
        i = index[name]
        coords[i] = (_float(tokens[1], path, lineno), _float(tokens[2], path, lineno))
        if any(t.upper().startswith("/FIXED") for t in tokens[3:]):
            fixed.add(i)
    return coords, fixed


def _read_nets(
    path: Path, index: Dict[str, int], sizes: np.ndarray
) -> List[Tuple[str, List[Pin]]]:
    nets: List[Tuple[str, List[Pin]]] = []
    pending = 0
    current: List[Pin] = []
    name = ""
    for lineno, tokens in _records(path):
        head = tokens[0]
        if head in ("NumNets", "NumPins"):
            continue
        if head == "NetDegree":
            if pending:
                raise BookshelfParseError(path, lineno, f"net {name} ended after {len(current)} pins")
            degree = int(_float(_after_colon(tokens, path, lineno), path, lineno))
            if degree < 1:
                raise BookshelfParseError(path, lineno, "net degree must be >= 1")
            colon = tokens.index(":")
            name = tokens[colon + 2] if len(tokens) > colon + 2 else f"net{len(nets)}"
            pending, current = degree, []
            continue
        if not pending:
            raise BookshelfParseError(path, lineno, "pin line outside a NetDegree block")
        if head not in index:
            raise BookshelfParseError(path, lineno, f"net {name} references undeclared node {head}")
        i = index[head]
        dx = dy = 0.0
        if ":" in tokens:
            colon = tokens.index(":")
            if len(tokens) < colon + 3:
                raise BookshelfParseError(path, lineno, "expected ': dx dy' pin offset")
            dx = _float(tokens[colon + 1], path, lineno)
            dy = _float(tokens[colon + 2], path, lineno)
        w, h = sizes[i]
        current.append(Pin(i, dx + 0.5 * w, dy + 0.5 * h))
        pending -= 1
        if not pending:
            nets.append((name, current))
    if pending:
        raise BookshelfParseError(path, None, f"net {name} truncated: {pending} pins missing")
    return nets


def _read_wts(path: Path) -> Dict[str, float]:
    weights: Dict[str, float] = {}
    for lineno, tokens in _records(path):
        if len(tokens) < 2:
            raise BookshelfParseError(path, lineno, "expected 'name weight'")
        weights[tokens[0]] = _float(tokens[1], path, lineno)
    return weights


def _read_scl(path: Path) -> Optional[Tuple[float, float, float, float, float]]:
    """Return (xmin, ymin, xmax, ymax, row height) of all core rows."""
    xs: List[float] = []
    ys: List[float] = []
    row_y = row_h = None
    spacing = 1.0
    heights: List[float] = []
    for lineno, tokens in _records(path):
        head = tokens[0]
        if head == "Coordinate":
            row_y = _float(_after_colon(tokens, path, lineno), path, lineno)
        elif head == "Height":
            row_h = _float(_after_colon(tokens, path, lineno), path, lineno)
        elif head == "Sitespacing":
            spacing = _float(_after_colon(tokens, path, lineno), path, lineno)
        elif head == "SubrowOrigin":
            try:
                origin = _float(tokens[tokens.index("SubrowOrigin") + 2], path, lineno)
                sites = _float(tokens[tokens.index("NumSites") + 2], path, lineno)
            except (ValueError, IndexError):
                raise BookshelfParseError(path, lineno, "expected 'SubrowOrigin : x NumSites : n'") from None
            if row_y is None or row_h is None:
                raise BookshelfParseError(path, lineno, "row origin before Coordinate/Height")
            xs += [origin, origin + sites * spacing]
            ys += [row_y, row_y + row_h]
            heights.append(row_h)
    if not xs:
        return None
    return min(xs), min(ys), max(xs), max(ys), Counter(heights).most_common(1)[0][0]


def _classify(
    sizes: np.ndarray, flags: List[str], fixed_from_pl: set
) -> List[InstanceKind]:
    terminal = [f.lower().startswith("terminal") for f in flags]
    movable_h = [sizes[i, 1] for i in range(len(flags)) if not terminal[i] and i not in fixed_from_pl]
    modal = Counter(movable_h).most_common(1)[0][0] if movable_h else 0.0
    kinds: List[InstanceKind] = []
    for i, flag in enumerate(flags):
        w, h = sizes[i]
        if terminal[i] or i in fixed_from_pl:
            if flag.lower() == "terminal_ni" or w * h == 0:
                kinds.append(InstanceKind.IO_PIN)
            else:
                kinds.append(InstanceKind.FIXED_MACRO)
        elif modal > 0 and h > MACRO_HEIGHT_FACTOR * modal:
            kinds.append(InstanceKind.MOVABLE_MACRO)
        else:
            kinds.append(InstanceKind.MOVABLE_CELL)
    return kinds


def parse_design(aux_path: Path | str, *, num_bins: Optional[int] = None) -> DesignBundle:
    """Parse an ``.aux`` bundle into a :class:`DesignBundle`."""
    aux = Path(aux_path)
    files = _read_aux(aux)
    names, sizes, flags = _read_nodes(files["nodes"])
    index = {name: i for i, name in enumerate(names)}
    coords, fixed_from_pl = _read_pl(files["pl"], index)
    raw_nets = _read_nets(files["nets"], index, sizes)

    weights: Dict[str, float] = {}
    if "wts" in files and files["wts"].is_file():
        weights = _read_wts(files["wts"])
    net_names = {n for n, _ in raw_nets}
    unused = [k for k in weights if k not in net_names]
    if unused:
        logger.warning("ignoring %d .wts entries that do not name nets (e.g. %s)", len(unused), unused[0])

    kinds = _classify(sizes, flags, fixed_from_pl)
    for i, kind in enumerate(kinds):
        if kind.is_fixed and i not in coords:
            raise BookshelfParseError(files["pl"], None, f"fixed node {names[i]} has no position")

    positions = np.array([coords.get(i, (0.0, 0.0)) for i in range(len(names))], dtype=float).reshape(-1, 2)
    scl = _read_scl(files["scl"]) if "scl" in files else None
    if scl is not None:
        xmin, ymin, xmax, ymax, _ = scl
    elif len(names):
        xmin, ymin = positions.min(axis=0)
        xmax, ymax = (positions + sizes).max(axis=0)
    else:
        xmin = ymin = 0.0
        xmax = ymax = 1.0
    if xmax <= xmin:
        xmax = xmin + 1.0
    if ymax <= ymin:
        ymax = ymin + 1.0

    movable = sum(not k.is_fixed for k in kinds)
    bins = num_bins or default_bins(movable)
    instances = [
        Instance(names[i], float(sizes[i, 0]), float(sizes[i, 1]), kinds[i], float(positions[i, 0]), float(positions[i, 1]))
        for i in range(len(names))
    ]
    nets = [Net(name, tuple(pins), float(weights.get(name, 1.0))) for name, pins in raw_nets]
    try:
        region = PlacementRegion(float(xmin), float(ymin), float(xmax), float(ymax), bins, bins)
        netlist = Netlist(tuple(instances), tuple(nets), region, aux.stem)
    except NetlistError as exc:
        raise BookshelfParseError(aux, None, str(exc)) from exc
    logger.info(
        "parsed %s: %d movable, %d fixed, %d nets, %d pins",
        aux.name, netlist.num_movable, netlist.num_instances - netlist.num_movable, netlist.num_nets, netlist.num_pins,
    )
    return DesignBundle(netlist, positions.copy(), {"kind": "bookshelf", "aux": str(aux)})


def read_pl(netlist: Netlist, path: Path | str) -> np.ndarray:
    """Load a ``.pl`` onto ``netlist``; nodes not listed keep their loaded position."""
    coords, _ = _read_pl(Path(path), {inst.name: i for i, inst in enumerate(netlist.instances)})
    positions = netlist.positions.copy()
    for i, xy in coords.items():
        positions[i] = xy
    return positions


def write_pl(
    netlist: Netlist,
    positions: np.ndarray,
    path: Path | str,
    *,
    movable_only: bool = False,
) -> None:
    positions = netlist.check_positions(positions)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["UCLA pl 1.0", ""]
    for i, inst in enumerate(netlist.instances):
        fixed = inst.kind.is_fixed
        if movable_only and fixed:
            continue
        mark = " /FIXED" if fixed else ""
        lines.append(f"{inst.name} {positions[i, 0]:.{PL_DECIMALS}f} {positions[i, 1]:.{PL_DECIMALS}f} : N{mark}")
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise BookshelfParseError(path, None, f"cannot write placement: {exc}") from exc


def export_bookshelf(bundle: DesignBundle, directory: Path | str, name: Optional[str] = None) -> Path:
    """Write a complete Bookshelf set and return the ``.aux`` path."""
    netlist = bundle.netlist
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    stem = name or netlist.name

    terminals = [i for i in netlist.instances if i.kind.is_fixed]
    node_lines = ["UCLA nodes 1.0", "", f"NumNodes : {netlist.num_instances}", f"NumTerminals : {len(terminals)}"]
    for inst in netlist.instances:
        tag = ""
        if inst.kind is InstanceKind.IO_PIN:
            tag = " terminal_NI"
        elif inst.kind is InstanceKind.FIXED_MACRO:
            tag = " terminal"
        node_lines.append(f"{inst.name} {_fmt(inst.width)} {_fmt(inst.height)}{tag}")
    (out / f"{stem}.nodes").write_text("\n".join(node_lines) + "\n", encoding="utf-8")

    sizes = netlist.sizes
    net_lines = ["UCLA nets 1.0", "", f"NumNets : {netlist.num_nets}", f"NumPins : {netlist.num_pins}"]
    for net in netlist.nets:
        net_lines.append(f"NetDegree : {len(net.pins)} {net.name}")
        for pin in net.pins:
            w, h = sizes[pin.instance]
            net_lines.append(
                f"  {netlist.instances[pin.instance].name} B : {pin.dx - 0.5 * w:.{PL_DECIMALS}f} {pin.dy - 0.5 * h:.{PL_DECIMALS}f}"
            )
    (out / f"{stem}.nets").write_text("\n".join(net_lines) + "\n", encoding="utf-8")

    wts_lines = ["UCLA wts 1.0", ""] + [f"{net.name} {_fmt(net.weight)}" for net in netlist.nets]
    (out / f"{stem}.wts").write_text("\n".join(wts_lines) + "\n", encoding="utf-8")

    write_pl(netlist, bundle.positions, out / f"{stem}.pl")

    r = netlist.region
    movable_h = netlist.heights[netlist.movable_mask]
    row_h = float(Counter(movable_h.tolist()).most_common(1)[0][0]) if movable_h.size else r.height
    row_h = row_h if row_h > 0 else r.height
    num_rows = max(1, int(round(r.height / row_h)))
    row_h = r.height / num_rows
    scl_lines = ["UCLA scl 1.0", "", f"NumRows : {num_rows}", ""]
    for k in range(num_rows):
        scl_lines += [
            "CoreRow Horizontal",
            f"  Coordinate : {_fmt(r.ymin + k * row_h)}",
            f"  Height : {_fmt(row_h)}",
            "  Sitewidth : 1",
            "  Sitespacing : 1",
            "  Siteorient : 1",
            "  Sitesymmetry : 1",
            f"  SubrowOrigin : {_fmt(r.xmin)} NumSites : {_fmt(r.width)}",
            "End",
        ]
    (out / f"{stem}.scl").write_text("\n".join(scl_lines) + "\n", encoding="utf-8")

    aux = out / f"{stem}.aux"
    aux.write_text(
        f"RowBasedPlacement : {stem}.nodes {stem}.nets {stem}.wts {stem}.pl {stem}.scl\n", encoding="utf-8"
    )
    return aux
