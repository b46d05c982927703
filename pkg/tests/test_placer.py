from __future__ import annotations

import numpy as np
import pytest

from conftest import make_region
from src.errors import ConfigError
from src.gsp_init import gsp_initialize
from src.macro_schedule import ScheduleSpec
from src.netlist import BinGrid, Instance, InstanceKind, Net, Netlist, Pin, PlacementRegion, hpwl
import src.placer as placer_module
from src.placer import (
    PlacementTrace,
    PlacerConfig,
    density_weight_factor,
    placement_overflow,
    run_global_placement,
    wirelength_gamma,
)


def pulled_cell() -> Netlist:
    inst = (
        Instance("c", 2.0, 2.0, x=10.0, y=10.0),
        Instance("p", 0.0, 0.0, InstanceKind.IO_PIN, 80.0, 70.0),
    )
    return Netlist(inst, (Net("n", (Pin(0, 1.0, 1.0), Pin(1))),), make_region(100.0, 16))


def test_wirelength_only_run_converges_onto_pin():
    nl = pulled_cell()
    pos, trace = run_global_placement(nl, nl.positions, PlacerConfig(density_weight=0.0, max_iterations=500))
    assert trace.stop_reason == "converged"
    assert trace.iterations < 500
    assert hpwl(nl, pos) < 0.05 * trace.initial_hpwl
    assert pos[1].tolist() == [80.0, 70.0]


def test_start_point_is_evaluated_once(monkeypatch):
    nl = pulled_cell()
    start = nl.clamp_to_region(nl.positions)
    at_start = []
    original = placer_module._Objective.__call__

    def counting(self, positions, t, gamma, lam):
        at_start.append(np.array_equal(positions, start))
        return original(self, positions, t, gamma, lam)

    monkeypatch.setattr(placer_module._Objective, "__call__", counting)
    run_global_placement(nl, nl.positions, PlacerConfig(density_weight=0.0, max_iterations=1))
    assert len(at_start) >= 2
    assert sum(at_start) == 1


def test_feasible_start_does_no_iterations():
    inst = tuple(Instance(f"c{i}", 1.0, 1.0, x=10.0 + 20.0 * i, y=50.0) for i in range(4))
    nets = (Net("n", tuple(Pin(i) for i in range(4))),)
    nl = Netlist(inst, nets, make_region(100.0, 16))
    pos, trace = run_global_placement(nl, nl.positions)
    assert trace.iterations == 0
    assert trace.stop_reason == "overflow"
    assert np.array_equal(pos, nl.positions)


def test_no_movables_is_no_work():
    inst = (Instance("m", 10.0, 10.0, InstanceKind.FIXED_MACRO, 0.0, 0.0),)
    nl = Netlist(inst, (), make_region(100.0, 16))
    _, trace = run_global_placement(nl, nl.positions, PlacerConfig(density_weight=0.0))
    assert trace.stop_reason == "no-work"


def test_density_run_spreads_clustered_start(small_design):
    nl = small_design.netlist
    init = nl.positions.copy()
    mov = nl.movable_mask
    cx, cy = nl.region.center
    init[mov] = np.random.default_rng(0).normal([cx, cy], 2.0, size=(int(mov.sum()), 2))
    config = PlacerConfig(log_interval=0)
    snaps = []
    pos, trace = run_global_placement(
        nl, init, config, ScheduleSpec(horizon=100),
        callback=lambda it, p, tr: snaps.append(it), snapshot_interval=25,
    )
    assert trace.overflow[-1] < trace.initial_overflow
    assert trace.stop_reason in ("overflow", "max-iterations")
    assert snaps == list(range(0, trace.iterations, 25))
    assert trace.schedule_name == "sigma"
    assert len(trace.hpwl) == len(trace.overflow) == len(trace.density_weight) == trace.iterations
    assert np.array_equal(pos[nl.fixed_mask], nl.positions[nl.fixed_mask])
    r = nl.region
    assert np.all(pos[mov] >= [r.xmin - 1e-9, r.ymin - 1e-9])
    assert np.all(pos[mov] + nl.sizes[mov] <= [r.xmax + 1e-9, r.ymax + 1e-9])


def test_same_inputs_same_result(small_design):
    nl = small_design.netlist
    init = gsp_initialize(nl)
    config = PlacerConfig(max_iterations=20, log_interval=0)
    a, _ = run_global_placement(nl, init, config)
    b, _ = run_global_placement(nl, init, config)
    assert np.array_equal(a, b)


def test_wirelength_gamma_range():
    grid = BinGrid(PlacementRegion(0, 0, 10, 10), 10, 10)
    assert wirelength_gamma(1.0, grid, 1.0) == pytest.approx(10.0)
    assert wirelength_gamma(1.0, grid, 0.1) == pytest.approx(0.1)
    assert wirelength_gamma(1.0, grid, 5.0) == wirelength_gamma(1.0, grid, 1.0)
    assert wirelength_gamma(2.0, grid, 0.0) == pytest.approx(0.2)


def test_density_weight_factor_clamps():
    assert density_weight_factor(0.0, 1.0, 0.95, 1.05) == pytest.approx(1.05)
    assert density_weight_factor(1.0, 1.0, 0.95, 1.05) == pytest.approx(1.0)
    assert density_weight_factor(100.0, 1.0, 0.95, 1.05) == 0.95
    assert density_weight_factor(-100.0, 1.0, 0.95, 1.05) == 1.05


def test_placement_overflow_counts_excess():
    region = PlacementRegion(0, 0, 8, 8)
    grid = BinGrid(region, 8, 8)
    nl = Netlist((Instance("c", 1.0, 1.0, x=3.0, y=3.0),), (), region)
    assert placement_overflow(nl, nl.positions, grid, 0.5) == pytest.approx(0.5)


def test_trace_to_dict():
    trace = PlacementTrace()
    trace.record(hpwl=3.0, overflow=0.5)
    d = trace.to_dict()
    assert d["iterations"] == 1
    assert d["hpwl"] == [3.0]


@pytest.mark.parametrize(
    "kwargs",
    [
        {"target_density": 0.0},
        {"density_weight": -1.0},
        {"wirelength": "B2B"},
        {"lower_pcof": 1.1},
        {"stop_overflow": 1.0},
        {"num_bins_x": 4},
    ],
)
def test_invalid_config(kwargs):
    with pytest.raises(ConfigError):
        PlacerConfig(**kwargs)


@pytest.mark.slow
def test_five_hundred_cell_run_reaches_overflow_target():
    from src.synthetic import SyntheticSpec, generate_synthetic

    nl = generate_synthetic(SyntheticSpec(num_cells=500, num_macros=4, seed=0)).netlist
    _, trace = run_global_placement(nl, gsp_initialize(nl), PlacerConfig(log_interval=0), ScheduleSpec())
    assert trace.stop_reason == "overflow"
    assert trace.overflow[-1] <= 0.1
