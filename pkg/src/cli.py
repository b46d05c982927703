from __future__ import annotations

"""Command-line entry point: ``gsp-place <subcommand> ...``."""

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np
import pandas as pd

from .bookshelf import DesignBundle, export_bookshelf, parse_design, read_pl, write_pl
from .caching import ResultCache
from .errors import ConfigError, PlacementError, StageError
from .logging_utils import get_logger
from .macro_schedule import MODELS, schedule_frames
from .netlist import bin_density, hpwl
from .pipeline import (
    density_sweep,
    initial_positions,
    refine_positions,
    run_pipeline,
    seed_sweep,
    validate_report,
)
from .placer import placement_overflow, run_global_placement
from .run_config import RunConfig, load_config
from .spectral_graph import build_instance_graph, dump_edges
from .synthetic import SyntheticSpec, generate_synthetic

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_PLACEMENT = 2

_FLAG_TYPES = {"int": int, "float": float, "str": str, "Optional[float]": float}
_ALIASES = {"schedule_model": ["--schedule-model"], "target_density": ["--target-density"]}


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------

def _config_parent() -> argparse.ArgumentParser:
    """Shared flags: one ``--<key>`` per config key, plus run plumbing."""
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", type=Path, default=None, help="TOML config (default: [tool.gsp_placer] of pyproject.toml)")
    parent.add_argument("--workdir", type=Path, default=Path("build"), help="output directory")
    parent.add_argument("--verbose", action="store_true", help="echo DEBUG records to the console")
    keys = parent.add_argument_group("config keys")
    for f in fields(RunConfig):
        names = [f"--{f.name}"] + _ALIASES.get(f.name, [])
        if f.type == "bool":
            names.append("--" + f.name.replace("_", "-"))
            keys.add_argument(*dict.fromkeys(names), dest=f.name, action="store_const", const=True, default=None)
        else:
            choices = MODELS if f.name == "schedule_model" else None
            keys.add_argument(*names, dest=f.name, type=_FLAG_TYPES[f.type], default=None, choices=choices, metavar=f.name.upper())
    return parent


def _sweep_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--jobs", type=int, default=1, help="worker processes for independent runs")
    parent.add_argument("--cache-dir", type=Path, default=None, help="reuse results keyed by design and config")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gsp-place", description="Mixed-size global placement with spectral initialization")
    sub = parser.add_subparsers(dest="command", required=True)
    cfg = _config_parent()
    sweep = _sweep_parent()

    def design_cmd(name: str, help_text: str, parents=(cfg,)) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, parents=list(parents))
        p.add_argument("design", type=Path, help="Bookshelf .aux file")
        return p

    p = design_cmd("init", "spectral initial placement")
    p.add_argument("--dump-edges", type=Path, default=None, help="write the instance graph as 'i j w' lines")
    p = design_cmd("refine", "area-hint refinement of a placement")
    p.add_argument("--pl", type=Path, default=None, help="starting placement (default: spectral init)")
    p = design_cmd("place", "global placement from a placement")
    p.add_argument("--pl", type=Path, default=None, help="starting placement (default: the design's .pl)")
    p.add_argument("--snapshots", action="store_true", help="write placement SVGs every snapshot_interval iterations")
    p = design_cmd("pipeline", "init -> refine -> scheduled global placement")
    p.add_argument("--snapshots", action="store_true", help="write placement SVGs every snapshot_interval iterations")
    p.add_argument("--plot", action="store_true", help="write the final placement SVG")
    p = design_cmd("eval", "HPWL and overflow of a placement")
    p.add_argument("--pl", type=Path, default=None)
    p = design_cmd("plot", "render a placement to SVG")
    p.add_argument("--pl", type=Path, default=None)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--density", action="store_true", help="also write a bin-occupancy heat map next to the plot")
    p = design_cmd("schedule-dump", "heat maps of the fixed-macro density schedule")
    p.add_argument("--frames", type=int, default=6, help="number of evenly spaced iterations to render")
    p = design_cmd("seed-sweep", "HPWL statistics over consecutive seeds", (cfg, sweep))
    p.add_argument("--seeds", type=int, default=10)
    p = design_cmd("density-sweep", "pipeline vs baseline over target densities", (cfg, sweep))
    p.add_argument("--densities", type=float, nargs="+", default=[0.6, 0.7, 0.8, 0.9, 1.0])

    p = sub.add_parser("tune", help="multi-objective parameter search", parents=[cfg, sweep])
    p.add_argument("designs", type=Path, nargs="+", help="Bookshelf .aux files")
    p.add_argument("--budget", type=int, default=100)
    p.add_argument("--distill", type=int, default=5, help="representatives kept from the front")
    p.add_argument("--gamma-q", type=float, default=0.25)
    p.add_argument("--n-candidates", type=int, default=24)
    p.add_argument("--n-startup", type=int, default=10)

    p = sub.add_parser("gen-synthetic", help="write a synthetic Bookshelf design", parents=[cfg])
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--name", default="synthetic")
    p.add_argument("--cells", type=int, default=500)
    p.add_argument("--macros", type=int, default=4)
    p.add_argument("--io", type=int, default=0)
    p.add_argument("--central-macro", action="store_true")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    base = load_config(args.config)
    overrides = {f.name: getattr(args, f.name, None) for f in fields(RunConfig)}
    return base.with_overrides(overrides)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _write_json(path: Path, data: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, ensure_ascii=False, sort_keys=True), encoding="utf-8")
    logger.info("wrote %s", path)
    return path


def _load(design: Path) -> DesignBundle:
    return parse_design(design)


def _start_positions(bundle: DesignBundle, pl: Optional[Path]) -> np.ndarray:
    return read_pl(bundle.netlist, pl) if pl is not None else bundle.positions


def _metrics(bundle: DesignBundle, positions: np.ndarray, config: RunConfig) -> Dict[str, Any]:
    netlist = bundle.netlist
    pc = config.placer_config()
    grid = pc.grid_for(netlist)
    return {
        "design": netlist.name,
        "hpwl": hpwl(netlist, positions),
        "overflow": placement_overflow(netlist, positions, grid, pc.target_density),
        "num_movable": netlist.num_movable,
        "num_fixed": netlist.num_instances - netlist.num_movable,
        "num_nets": netlist.num_nets,
        "config_hash": config.config_hash(),
    }


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_init(args: argparse.Namespace, config: RunConfig) -> int:
    bundle = _load(args.design)
    if args.dump_edges is not None:
        dump_edges(build_instance_graph(bundle.netlist, max_degree=config.max_net_degree), args.dump_edges)
    positions = initial_positions(bundle, config)
    write_pl(bundle.netlist, positions, args.workdir / f"{bundle.name}.init.pl")
    _write_json(args.workdir / f"{bundle.name}.init.json", _metrics(bundle, positions, config))
    return EXIT_OK


def cmd_refine(args: argparse.Namespace, config: RunConfig) -> int:
    bundle = _load(args.design)
    start = read_pl(bundle.netlist, args.pl) if args.pl is not None else initial_positions(bundle, config)
    positions = refine_positions(bundle, start, config)
    write_pl(bundle.netlist, positions, args.workdir / f"{bundle.name}.refine.pl")
    _write_json(args.workdir / f"{bundle.name}.refine.json", _metrics(bundle, positions, config))
    return EXIT_OK


def _snapshot(bundle: DesignBundle, args: argparse.Namespace):
    if not getattr(args, "snapshots", False):
        return None
    from .plotting import snapshot_writer

    return snapshot_writer(bundle.netlist, args.workdir / "snapshots")


def cmd_place(args: argparse.Namespace, config: RunConfig) -> int:
    bundle = _load(args.design)
    positions, trace = run_global_placement(
        bundle.netlist, _start_positions(bundle, args.pl), config.placer_config(), config.schedule_spec(),
        callback=_snapshot(bundle, args), snapshot_interval=config.snapshot_interval,
    )
    write_pl(bundle.netlist, positions, args.workdir / f"{bundle.name}.gp.pl")
    metrics = _metrics(bundle, positions, config)
    metrics.update(iterations=trace.iterations, stop_reason=trace.stop_reason, trace=trace.to_dict())
    _write_json(args.workdir / f"{bundle.name}.gp.json", metrics)
    return EXIT_OK


def cmd_pipeline(args: argparse.Namespace, config: RunConfig) -> int:
    bundle = _load(args.design)
    metrics_path = args.workdir / f"{bundle.name}.metrics.json"
    try:
        positions, report = run_pipeline(bundle, config, snapshot=_snapshot(bundle, args))
    except StageError as exc:
        if exc.report is not None:
            _write_json(metrics_path, exc.report.to_dict())
        raise
    write_pl(bundle.netlist, positions, args.workdir / f"{bundle.name}.gp.pl")
    data = report.to_dict()
    problems = validate_report(data)
    if problems:
        logger.warning("report does not match the schema: %s", "; ".join(problems))
    _write_json(metrics_path, data)
    if args.plot:
        from .plotting import plot_placement, plot_trace

        plot_placement(bundle.netlist, positions, args.workdir / f"{bundle.name}.gp.svg")
        if report.trace and report.trace["hpwl"]:
            plot_trace(report.trace, args.workdir / f"{bundle.name}.trace.svg", bundle.name)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, config: RunConfig) -> int:
    bundle = _load(args.design)
    metrics = _metrics(bundle, _start_positions(bundle, args.pl), config)
    _write_json(args.workdir / f"{bundle.name}.eval.json", metrics)
    print(json.dumps(metrics, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_plot(args: argparse.Namespace, config: RunConfig) -> int:
    from .plotting import plot_density, plot_placement

    bundle = _load(args.design)
    out = Path(args.out or args.workdir / f"{bundle.name}.svg")
    positions = _start_positions(bundle, args.pl)
    plot_placement(bundle.netlist, positions, out)
    if args.density:
        grid = config.placer_config().grid_for(bundle.netlist)
        occupancy = bin_density(bundle.netlist, positions, grid)
        plot_density(occupancy.density, grid, out.with_suffix(".density.svg"), f"{bundle.name} bin occupancy")
    return EXIT_OK


def cmd_schedule_dump(args: argparse.Namespace, config: RunConfig) -> int:
    from .plotting import plot_schedule_frames

    bundle = _load(args.design)
    spec = config.schedule_spec()
    if spec is None:
        raise ConfigError("schedule-dump needs the macro schedule enabled (drop --skip-schedule)")
    if args.frames < 1:
        raise ConfigError("--frames must be >= 1")
    grid = config.placer_config().grid_for(bundle.netlist)
    ts = sorted({int(round(t)) for t in np.linspace(0, spec.snap_iteration, args.frames)})
    frames = schedule_frames(bundle.netlist, grid, spec, ts)
    stem = args.workdir / f"{bundle.name}.schedule.{spec.model}"
    plot_schedule_frames(frames, grid, stem.with_suffix(".svg"), spec.model)
    rows = [{"t": t, "parameter": name, "value": value, "mass": float(d.sum() * grid.bin_area)} for t, name, value, d in frames]
    pd.DataFrame(rows).to_csv(stem.with_suffix(".csv"), index=False)
    return EXIT_OK


def _cache(args: argparse.Namespace) -> Optional[ResultCache]:
    return ResultCache(args.cache_dir) if args.cache_dir is not None else None


def cmd_seed_sweep(args: argparse.Namespace, config: RunConfig) -> int:
    bundle = _load(args.design)
    summary = seed_sweep(bundle, config, args.seeds, workers=args.jobs, cache=_cache(args))
    _write_json(args.workdir / f"{bundle.name}.seeds.json", summary)
    if "mean" in summary:
        logger.info("%s: min %.6g max %.6g mean %.6g range/avg %.3g", bundle.name, summary["min"], summary["max"], summary["mean"], summary["range_over_avg"])
    return EXIT_OK


def cmd_density_sweep(args: argparse.Namespace, config: RunConfig) -> int:
    from .plotting import plot_density_sweep

    bundle = _load(args.design)
    table = density_sweep(bundle, config, args.densities, workers=args.jobs, cache=_cache(args))
    csv = args.workdir / f"{bundle.name}.density.csv"
    csv.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(csv, index=False)
    plot_density_sweep(table, csv.with_suffix(".svg"))
    return EXIT_OK


def cmd_tune(args: argparse.Namespace, config: RunConfig) -> int:
    from .plotting import plot_front
    from .tuner import PipelineEvaluator, TunerConfig, default_assignment, default_space, distill, export_trials, run_tuner

    bundles = [_load(d) for d in args.designs]
    space = default_space()
    evaluator = PipelineEvaluator(bundles, config, args.cache_dir)
    tuner_config = TunerConfig(args.gamma_q, args.n_candidates, args.n_startup, config.seed, args.jobs)
    out = args.workdir / "tune"
    out.mkdir(parents=True, exist_ok=True)
    result = run_tuner(
        evaluator, space, args.budget, tuner_config,
        warm_start=default_assignment(space, config), log_path=out / "trials.jsonl",
    )
    picks = distill(result.front.trials, args.distill, seed=config.seed)
    export_trials(result.front.trials, out / "front.json", out / "front.csv")
    export_trials(picks, out / "distilled.json", out / "distilled.csv")
    done = np.array([t.objectives for t in result.trials if t.ok], dtype=float)
    if done.size:
        plot_front(
            done[:, :2], out / "front.svg",
            front=result.front.objectives()[:, :2],
            highlight=np.array([t.objectives[:2] for t in picks], dtype=float),
        )
    return EXIT_OK


def cmd_gen_synthetic(args: argparse.Namespace, config: RunConfig) -> int:
    spec = SyntheticSpec(
        num_cells=args.cells, num_macros=args.macros, num_io=args.io,
        central_macro=args.central_macro, seed=config.seed,
    )
    bundle = generate_synthetic(spec)
    aux = export_bookshelf(bundle, args.out, args.name)
    _write_json(args.out / f"{args.name}.synthetic.json", spec.describe())
    logger.info("wrote %s", aux)
    return EXIT_OK


COMMANDS = {
    "init": cmd_init,
    "refine": cmd_refine,
    "place": cmd_place,
    "pipeline": cmd_pipeline,
    "eval": cmd_eval,
    "plot": cmd_plot,
    "schedule-dump": cmd_schedule_dump,
    "seed-sweep": cmd_seed_sweep,
    "density-sweep": cmd_density_sweep,
    "tune": cmd_tune,
    "gen-synthetic": cmd_gen_synthetic,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    get_logger("src", args.workdir, verbose=args.verbose)
    try:
        config = resolve_config(args)
        return COMMANDS[args.command](args, config)
    except PlacementError as exc:
        logger.error("%s", exc)
        return EXIT_PLACEMENT
    except Exception:
        logger.exception("unexpected failure in %s", args.command)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
