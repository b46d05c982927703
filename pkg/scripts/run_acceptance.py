"""Desk-scale comparative experiments on synthetic designs.

Writes CSV/JSON tables into ``--out`` and prints a pass/fail line per check:

    python scripts/run_acceptance.py --out build/acceptance --jobs 4
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Dict, List

import numpy as np
import pandas as pd

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT))

from src.area_hint import refine  # noqa: E402
from src.caching import ResultCache  # noqa: E402
from src.gsp_init import gsp_initialize  # noqa: E402
from src.logging_utils import get_logger  # noqa: E402
from src.pipeline import compare_flows, schedule_ablation, seed_sweep  # noqa: E402
from src.run_config import RunConfig  # noqa: E402
from src.synthetic import SyntheticSpec, generate_synthetic  # noqa: E402
from src.tuner import ParamSpace, ParamSpec, Trial, TunerConfig, hypervolume, run_tuner  # noqa: E402

DESIGNS = ((500, 4), (1000, 6), (2000, 8), (3000, 12), (5000, 16))
TOY_REF = (25.0, 49.0)


def toy_objective(params: Dict[str, float]):
    x = params["x"]
    return x * x, (x - 2.0) ** 2, 0.0


def _toy_front_hv(trials: List[Trial]) -> float:
    pts = np.array([t.objectives[:2] for t in trials if t.ok], dtype=float)
    return hypervolume(pts, TOY_REF)


def check_repulsion(seeds: int) -> Dict:
    wins = 0
    rows = []
    for seed in range(seeds):
        bundle = generate_synthetic(SyntheticSpec(num_cells=400, num_macros=1, central_macro=True, num_io=32, seed=seed))
        netlist = bundle.netlist
        config = RunConfig(seed=seed)
        init = netlist.centers(gsp_initialize(netlist, config.init_config()))
        refined = refine(init, netlist, config.hint_config())
        m = int(netlist.fixed_macro_ids[0])
        lo = netlist.positions[m]
        hi = lo + netlist.sizes[m]

        def inside(c: np.ndarray) -> int:
            mov = c[netlist.movable_mask]
            return int(np.sum(np.all((mov > lo) & (mov < hi), axis=1)))

        before, after = inside(init), inside(refined)
        wins += after < before
        rows.append({"seed": seed, "inside_init": before, "inside_refined": after})
    return {"wins": wins, "seeds": seeds, "passed": wins >= int(np.ceil(0.9 * seeds)), "runs": rows}


def check_toy_tuner(pairs: int, budget: int) -> Dict:
    space = ParamSpace((ParamSpec("x", "real", -5.0, 5.0),))
    wins = 0
    for seed in range(pairs):
        motpe = run_tuner(toy_objective, space, budget, TunerConfig(seed=seed), warm_start={"x": 0.0})
        rng = np.random.default_rng(seed)
        random_trials = [Trial(i, {"x": float(x)}, toy_objective({"x": float(x)})) for i, x in enumerate(rng.uniform(-5, 5, budget))]
        wins += _toy_front_hv(motpe.trials) >= _toy_front_hv(random_trials)
    return {"wins": wins, "pairs": pairs, "passed": wins >= int(np.ceil(0.8 * pairs))}


def main() -> None:
    parser = argparse.ArgumentParser(description="Run the desk-scale comparative experiments")
    parser.add_argument("--out", type=Path, default=Path("build/acceptance"))
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--cache-dir", type=Path, default=None)
    parser.add_argument("--quick", action="store_true", help="only the two smallest designs, 3 seeds")
    args = parser.parse_args()

    logger = get_logger("src", args.out)
    args.out.mkdir(parents=True, exist_ok=True)
    cache = ResultCache(args.cache_dir) if args.cache_dir else None
    designs = DESIGNS[:2] if args.quick else DESIGNS
    seeds = list(range(3 if args.quick else args.seeds))
    bundles = [generate_synthetic(SyntheticSpec(num_cells=c, num_macros=m, num_io=32, seed=100 + i)) for i, (c, m) in enumerate(designs)]
    config = RunConfig()
    results: Dict[str, Dict] = {}

    results["repulsion"] = check_repulsion(len(seeds))

    flows = compare_flows(bundles, config, seeds, workers=args.jobs, cache=cache)
    flows.to_csv(args.out / "flows.csv", index=False)
    need = int(np.ceil(0.8 * len(bundles)))
    results["end_to_end"] = {"wins": int(flows["full_wins"].sum()), "designs": len(bundles), "passed": int(flows["full_wins"].sum()) >= need}

    ablation = schedule_ablation(bundles, config, seeds, workers=args.jobs, cache=cache)
    ablation.to_csv(args.out / "schedule_models.csv", index=False)
    restoration_wins = int((ablation["exp-restoration"] <= ablation["gaussian-redistribution"]).sum())
    results["schedule_models"] = {"wins": restoration_wins, "designs": len(bundles), "passed": restoration_wins >= int(np.ceil(0.6 * len(bundles)))}

    sweeps = [seed_sweep(b, config, len(seeds), workers=args.jobs, cache=cache) for b in bundles]
    stability = pd.DataFrame([{k: s.get(k) for k in ("design", "min", "max", "mean", "range_over_avg")} for s in sweeps])
    stability.to_csv(args.out / "seed_stability.csv", index=False)
    results["seed_stability"] = {"worst_range_over_avg": float(stability["range_over_avg"].max()), "passed": bool((stability["range_over_avg"] <= 0.02).all())}

    results["toy_tuner"] = check_toy_tuner(3 if args.quick else 10, 60)

    (args.out / "acceptance.json").write_text(json.dumps(results, indent=2), encoding="utf-8")
    for name, res in results.items():
        logger.info("%-16s %s", name, "PASS" if res["passed"] else "FAIL")


if __name__ == "__main__":
    main()
