from __future__ import annotations

import numpy as np
import pytest

from conftest import make_region, random_netlist
from src.area_hint import (
    NODE_BIN_VIRTUAL,
    NODE_INSTANCE,
    NODE_MACRO_PIN,
    NODE_MACRO_VIRTUAL,
    HintConfig,
    apply_refinement_filter,
    bin_phi,
    bin_virtual_edges,
    build_hint_laplacian,
    expand_macro_pins,
    free_block_radius,
    macro_repulsion_edges,
    refine,
    refinement_response,
)
from src.errors import ConfigError, NetlistError
from src.gsp_init import gsp_initialize
from src.netlist import BinGrid, DensityGrid, Instance, InstanceKind, Net, Netlist, Pin, PlacementRegion, bin_density
from src.run_config import RunConfig
from src.spectral_graph import SignedGraph, dense_filter_oracle, gershgorin_upper, signed_laplacian


def pinned_macro_netlist() -> Netlist:
    inst = (
        Instance("a", 1.0, 1.0),
        Instance("b", 1.0, 1.0),
        Instance("m", 10.0, 10.0, InstanceKind.FIXED_MACRO, 20.0, 20.0),
        Instance("q", 8.0, 8.0, InstanceKind.FIXED_MACRO, 60.0, 60.0),
    )
    nets = (
        Net("n0", (Pin(0, 0.5, 0.5), Pin(2, 0.0, 5.0))),
        Net("n1", (Pin(1, 0.5, 0.5), Pin(2, 0.0, 5.0))),
        Net("n2", (Pin(1, 0.5, 0.5), Pin(2, 10.0, 5.0))),
    )
    return Netlist(inst, nets, make_region())


def test_macro_pin_sites_are_deduplicated():
    nl = pinned_macro_netlist()
    exp = expand_macro_pins(nl)
    assert exp.num_sites == 2
    assert exp.num_nodes == 6
    assert exp.site_owner.tolist() == [2, 2]
    assert exp.site_positions.tolist() == [[20.0, 25.0], [30.0, 25.0]]
    # pins on the same site share a node; cell pins keep their instance node
    assert exp.pin_node.tolist() == [0, 4, 1, 4, 1, 5]


def test_macro_repulsion_weights():
    centers = np.array([[50.0, 50.0], [55.0, 50.0], [70.0, 50.0], [52.0, 52.0]])
    weights = np.array([1.0, 2.0, 1.0, 1.0])
    candidates = np.array([True, True, True, False])
    idx, w = macro_repulsion_edges((50.0, 50.0), (20.0, 10.0), centers, weights, candidates)
    assert idx.tolist() == [0, 1]
    assert w == pytest.approx([-1.0, -2.0 * np.exp(-0.5)])
    with pytest.raises(NetlistError):
        macro_repulsion_edges((0, 0), (0.0, 5.0), centers, weights, candidates)


def test_overlap_policy_catches_straddling_cells():
    centers = np.array([[61.0, 50.0]])
    sizes = np.array([[4.0, 4.0]])
    ok = np.array([True])
    assert macro_repulsion_edges((50, 50), (20, 20), centers, np.ones(1), ok)[0].size == 0
    idx, _ = macro_repulsion_edges((50, 50), (20, 20), centers, np.ones(1), ok, policy="overlap", sizes=sizes)
    assert idx.tolist() == [0]


def test_bin_phi_signs():
    phi = bin_phi(np.array([0.0, 0.9, 2.0]), 0.9, 4.0)
    assert phi[0] < 0 and phi[2] > 0
    assert phi[1] == pytest.approx(0.0)
    assert np.all(np.abs(phi) < 1.0)


def test_hint_graph_node_order(small_design):
    nl = small_design.netlist
    config = HintConfig()
    hint, L = build_hint_laplacian(nl, nl.centers(nl.positions), config)
    kinds = hint.node_kind
    assert np.all(kinds[: nl.num_instances] == NODE_INSTANCE)
    assert np.all(np.diff(kinds) >= 0)
    assert hint.nodes_of(NODE_MACRO_VIRTUAL).size == nl.fixed_macro_ids.size
    assert hint.nodes_of(NODE_MACRO_PIN).size > 0
    assert hint.nodes_of(NODE_BIN_VIRTUAL).size > 0
    assert hint.anchors.shape == (hint.graph.num_nodes - nl.num_instances, 2)
    assert np.all(hint.graph.fixed[nl.num_instances :])
    assert np.allclose(L @ np.ones(L.shape[0]), 0.0)


def test_negative_edge_amplifies_difference():
    g = SignedGraph.from_edges(2, np.array([0]), np.array([1]), np.array([-1.0]))
    L = signed_laplacian(g)
    out = apply_refinement_filter(L, 1, np.array([1.0, -1.0]), lambda_up=2.0)
    assert out.tolist() == [2.0, -2.0]
    # Gershgorin bound is zero here, so the default falls back to identity
    assert apply_refinement_filter(L, 3, np.array([1.0, -1.0])).tolist() == [1.0, -1.0]


def random_hint_build(seed: int):
    rng = np.random.default_rng(seed)
    nl = random_netlist(int(rng.integers(20, 61)), int(rng.integers(20, 80)), seed=seed, macros=int(rng.integers(1, 3)))
    centers = nl.centers(nl.positions)
    mov = nl.movable_mask
    centers[mov] = rng.uniform(5.0, 95.0, size=(int(mov.sum()), 2))
    config = HintConfig(num_bins_x=6, num_bins_y=6, detection_ratio=0.5)
    hint, L = build_hint_laplacian(nl, centers, config)
    return nl, centers, config, hint, L


@pytest.mark.parametrize("seed", range(50))
def test_refinement_filter_matches_dense_oracle(seed):
    _, centers, _, hint, L = random_hint_build(seed)
    lam_up = gershgorin_upper(L)
    sig = hint.full_signal(centers)
    fast = apply_refinement_filter(L, 2, sig)
    slow = dense_filter_oracle(L, lambda lam: refinement_response(lam, lam_up, 2), sig)
    assert np.allclose(fast, slow, rtol=1e-9, atol=1e-9 * np.abs(slow).max())


@pytest.mark.parametrize("seed", range(20))
def test_hint_weight_signs(seed):
    nl, centers, config, hint, _ = random_hint_build(seed)
    i, j, w = hint.graph.edges()
    kind = hint.node_kind
    assert np.all(w[kind[j] == NODE_MACRO_VIRTUAL] < 0)
    on_bins = kind[j] == NODE_BIN_VIRTUAL
    assert on_bins.any()
    assert np.all(kind[i[on_bins]] == NODE_INSTANCE)
    positions = nl.positions.copy()
    positions[nl.movable_mask] = nl.lower_left(centers)[nl.movable_mask]
    density = bin_density(nl, positions, BinGrid(nl.region, config.num_bins_x, config.num_bins_y))
    phi = bin_phi(density.density.ravel()[hint.node_owner[j[on_bins]]], config.bin_capacity, config.slope)
    assert np.array_equal(np.sign(w[on_bins]), -np.sign(phi))


def test_hint_gain_scales_only_hint_edges(small_design):
    nl = small_design.netlist
    c = nl.centers(nl.positions)
    h1, _ = build_hint_laplacian(nl, c, HintConfig(hint_gain=1.0))
    h2, _ = build_hint_laplacian(nl, c, HintConfig(hint_gain=2.0))
    i1, j1, w1 = h1.graph.edges()
    i2, j2, w2 = h2.graph.edges()
    assert np.array_equal(i1, i2) and np.array_equal(j1, j2)
    hinted = h1.graph.virtual[j1]
    assert hinted.any()
    assert w2[hinted] == pytest.approx(2.0 * w1[hinted])
    assert np.array_equal(w2[~hinted], w1[~hinted])


def test_pinned_rows_hold_during_filtering():
    g = SignedGraph.from_edges(3, np.array([0, 1]), np.array([1, 2]), np.array([1.0, -0.5]))
    L = signed_laplacian(g)
    pinned = np.array([True, False, True])
    assert free_block_radius(L, ~pinned) == pytest.approx(0.5)
    out = apply_refinement_filter(L, 3, np.array([0.0, 1.0, 3.0]), lambda_up=4.0, pinned=pinned)
    x = 1.0
    for _ in range(3):
        x -= (-1.0 * 0.0 + 0.5 * x + 0.5 * 3.0) / 4.0
    assert out[0] == 0.0 and out[2] == 3.0
    assert out[1] == pytest.approx(x)


@pytest.mark.parametrize("seed", range(10))
def test_free_block_radius_bounds_spectrum(seed):
    rng = np.random.default_rng(seed)
    g = SignedGraph.from_edges(30, rng.integers(0, 30, 90), rng.integers(0, 30, 90), rng.uniform(-2.0, 1.0, 90))
    L = signed_laplacian(g)
    free = rng.random(30) < 0.6
    lam = np.linalg.eigvalsh(L.toarray()[np.ix_(free, free)])
    assert np.abs(lam).max() <= free_block_radius(L, free) + 1e-9
    assert free_block_radius(L, np.zeros(30, dtype=bool)) == 0.0


def test_blend_step_contracts(small_design):
    nl = small_design.netlist
    c = nl.clamp_centers(nl.centers(nl.positions))
    for gamma in (0.0, 0.3, 1.0):
        steps = []
        refine(
            c, nl, HintConfig(relaxation=gamma),
            callback=lambda k, g, filtered, g_next: steps.append(
                (np.linalg.norm(g_next - g), np.linalg.norm(filtered - g))
            ),
        )
        assert len(steps) == 3
        for moved, proposed in steps:
            assert moved <= gamma * proposed + 1e-9 * max(1.0, proposed)


def cells_inside_macro(nl: Netlist, centers: np.ndarray) -> int:
    m = int(nl.fixed_macro_ids[0])
    lo = nl.positions[m]
    hi = lo + nl.sizes[m]
    mov = centers[nl.movable_mask]
    return int(np.sum(np.all((mov > lo) & (mov < hi), axis=1)))


@pytest.mark.slow
def test_refinement_clears_central_macro(central_macro_design):
    fewer = 0
    for seed in range(10):
        nl = central_macro_design(seed).netlist
        config = RunConfig(seed=seed)
        start = nl.centers(gsp_initialize(nl, config.init_config()))
        out = refine(start, nl, config.hint_config())
        fewer += cells_inside_macro(nl, out) < cells_inside_macro(nl, start)
    assert fewer >= 9


def test_zero_iterations_is_identity(small_design):
    nl = small_design.netlist
    c = nl.centers(nl.positions)
    assert np.array_equal(refine(c, nl, HintConfig(iterations=0)), c)


def test_refine_keeps_fixed_rows_and_region(small_design):
    nl = small_design.netlist
    c = nl.centers(nl.positions)
    seen = []
    out = refine(c, nl, HintConfig(iterations=2), callback=lambda k, *_: seen.append(k))
    assert seen == [0, 1]
    assert np.array_equal(out[nl.fixed_mask], c[nl.fixed_mask])
    mov = nl.movable_mask
    lo = nl.sizes[mov] / 2
    assert np.all(out[mov] >= lo - 1e-9)
    assert np.all(out[mov] <= np.array([nl.region.xmax, nl.region.ymax]) - lo + 1e-9)


def test_cell_inside_macro_is_pushed_out():
    # one cell inside a central macro, wired straight up to an IO pin
    inst = (
        Instance("a", 1.0, 1.0, x=43.5, y=49.5),
        Instance("m", 40.0, 40.0, InstanceKind.FIXED_MACRO, 30.0, 30.0),
        Instance("p", 0.0, 0.0, InstanceKind.IO_PIN, 44.0, 95.0),
    )
    nl = Netlist(inst, (Net("n", (Pin(0, 0.5, 0.5), Pin(2))),), make_region(100.0, 10))
    config = HintConfig(iterations=1, num_bins_x=10, num_bins_y=10)
    c = nl.centers(nl.positions)
    out = refine(c, nl, config)
    assert out[0, 0] < c[0, 0]
    assert abs(out[0, 0] - 50.0) > abs(c[0, 0] - 50.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"iterations": -1},
        {"relaxation": 1.5},
        {"detection_ratio": 0.0},
        {"filter_k": 0},
        {"candidate_policy": "nearest"},
        {"slope": 0.0},
        {"hint_gain": 0.0},
    ],
)
def test_invalid_config(kwargs):
    with pytest.raises(ConfigError):
        HintConfig(**kwargs)


def test_detection_window():
    assert HintConfig(num_bins_x=32, num_bins_y=8).window == (3, 1)


def test_bin_edges_repel_from_full_bins_and_attract_to_empty_ones():
    config = HintConfig(num_bins_x=8, num_bins_y=8)
    grid = BinGrid(PlacementRegion(0, 0, 8, 8), 8, 8)
    density = np.zeros((8, 8))
    density[2, 2] = 2.0
    density[0, 0] = config.bin_capacity
    centers = np.array([[2.5, 2.5], [5.5, 5.5], [0.5, 0.5]])
    inst, bins, w = bin_virtual_edges(DensityGrid(grid, density), centers, config, np.ones(3), np.ones(3, dtype=bool))
    # the cell sitting in a bin at capacity gets no edge
    assert inst.tolist() == [0, 1]
    assert bins.tolist() == [2 * 8 + 2, 5 * 8 + 5]
    assert w[0] == pytest.approx(-bin_phi(np.array(2.0), config.bin_capacity, config.slope))
    assert w[1] == pytest.approx(-bin_phi(np.array(0.0), config.bin_capacity, config.slope))
    assert w[0] < 0 < w[1]
