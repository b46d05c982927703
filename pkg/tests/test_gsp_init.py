from __future__ import annotations

import logging

import numpy as np
import pytest

from conftest import make_region, random_netlist
from src.errors import ConfigError
from src.gsp_init import InitConfig, gsp_initialize, random_signal
from src.netlist import Instance, InstanceKind, Net, Netlist, Pin
from src.spectral_graph import build_instance_graph, smoothness


def test_same_seed_is_deterministic(small_design):
    nl = small_design.netlist
    a = gsp_initialize(nl, InitConfig(seed=4))
    b = gsp_initialize(nl, InitConfig(seed=4))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, gsp_initialize(nl, InitConfig(seed=5)))


def test_fixed_rows_untouched_and_inside_region(small_design):
    nl = small_design.netlist
    pos = gsp_initialize(nl)
    assert np.array_equal(pos[nl.fixed_mask], nl.positions[nl.fixed_mask])
    r = nl.region
    mov = nl.movable_mask
    assert np.all(pos[mov] >= [r.xmin, r.ymin])
    assert np.all(pos[mov] + nl.sizes[mov] <= [r.xmax + 1e-9, r.ymax + 1e-9])


def test_random_signal_respects_window():
    nl = random_netlist(200, 0, seed=0)
    c = random_signal(nl, seed=1, window=0.5)
    assert c.min() >= 25.0 and c.max() <= 75.0


def test_bbox_affine_stretches_to_window():
    nl = random_netlist(100, 150, seed=1)
    pos = gsp_initialize(nl, InitConfig(window=0.5, seed=2))
    centers = nl.centers(pos)
    assert centers.min(axis=0) == pytest.approx([25.0, 25.0])
    assert centers.max(axis=0) == pytest.approx([75.0, 75.0])


def ring_netlist(n: int) -> Netlist:
    inst = tuple(Instance(f"c{i}", 1.0, 1.0) for i in range(n))
    nets = tuple(Net(f"n{i}", (Pin(i, 0.5, 0.5), Pin((i + 1) % n, 0.5, 0.5))) for i in range(n))
    return Netlist(inst, nets, make_region())


def test_filter_reduces_wire_energy():
    # on a regular graph the filter keeps constants, so the drop is all high-frequency energy
    nl = ring_netlist(200)
    graph = build_instance_graph(nl)
    raw = random_signal(nl, seed=0)
    smooth = nl.centers(gsp_initialize(nl, InitConfig(seed=0, rescale="none")))
    assert np.all(smoothness(graph, smooth) < 0.5 * smoothness(graph, raw))


def test_no_movables_returns_input():
    inst = (Instance("m", 5.0, 5.0, InstanceKind.FIXED_MACRO, 1.0, 2.0),)
    nl = Netlist(inst, (), make_region())
    assert np.array_equal(gsp_initialize(nl), nl.positions)


def test_single_movable_skips_rescale(caplog):
    inst = (
        Instance("a", 1.0, 1.0),
        Instance("m", 5.0, 5.0, InstanceKind.FIXED_MACRO, 10.0, 10.0),
    )
    nl = Netlist(inst, (Net("n", (Pin(0), Pin(1))),), make_region())
    with caplog.at_level(logging.WARNING, logger="src.gsp_init"):
        pos = gsp_initialize(nl)
    assert np.all(np.isfinite(pos))
    assert "skipping rescale" in caplog.text


@pytest.mark.parametrize("kwargs", [{"window": 0.0}, {"window": 1.5}, {"rescale": "zscore"}])
def test_invalid_config(kwargs):
    with pytest.raises(ConfigError):
        InitConfig(**kwargs)


def circulant_netlist(n: int, weights: tuple[float, float]) -> Netlist:
    inst = tuple(Instance(f"c{i}", 1.0, 1.0) for i in range(n))
    nets = tuple(
        Net(f"n{offset}_{i}", (Pin(i, 0.5, 0.5), Pin((i + offset) % n, 0.5, 0.5)), w)
        for offset, w in zip((1, 2), weights)
        for i in range(n)
    )
    return Netlist(inst, nets, make_region())


@pytest.mark.parametrize("seed", range(20))
def test_filtered_sample_is_no_rougher_than_input(seed):
    rng = np.random.default_rng(seed)
    nl = circulant_netlist(int(rng.integers(20, 150)), (float(rng.uniform(0.5, 2.0)), float(rng.uniform(2.5, 4.0))))
    graph = build_instance_graph(nl)
    raw = random_signal(nl, seed=seed, window=0.5)
    out = nl.centers(gsp_initialize(nl, InitConfig(seed=seed, window=0.5, rescale="none")))
    assert np.all(smoothness(graph, out) <= smoothness(graph, raw))


@pytest.mark.parametrize("seed", range(10))
def test_cells_between_diagonal_pads_stay_between(seed):
    inst = (
        Instance("a", 1.0, 1.0),
        Instance("b", 1.0, 1.0),
        Instance("p0", 0.0, 0.0, InstanceKind.IO_PIN, 0.0, 0.0),
        Instance("p1", 0.0, 0.0, InstanceKind.IO_PIN, 100.0, 100.0),
    )
    nets = (
        Net("left", (Pin(2), Pin(0, 0.5, 0.5))),
        Net("mid", (Pin(0, 0.5, 0.5), Pin(1, 0.5, 0.5))),
        Net("right", (Pin(1, 0.5, 0.5), Pin(3))),
    )
    nl = Netlist(inst, nets, make_region())
    centers = nl.centers(gsp_initialize(nl, InitConfig(seed=seed, window=0.5, rescale="none")))
    cells = centers[:2]
    assert np.all(cells > 0.0) and np.all(cells < 100.0)
