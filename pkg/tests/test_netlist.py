from __future__ import annotations

import numpy as np
import pytest

from conftest import make_region, random_netlist
from src.errors import ConfigError, NetlistError
from src.netlist import (
    BinGrid,
    DensityGrid,
    Instance,
    InstanceKind,
    Net,
    Netlist,
    Pin,
    PlacementRegion,
    bin_density,
    density_overflow,
    hpwl,
    net_bboxes,
)


def two_pin(p0, p1) -> Netlist:
    inst = (Instance("a", 0.0, 0.0, x=p0[0], y=p0[1]), Instance("b", 0.0, 0.0, x=p1[0], y=p1[1]))
    return Netlist(inst, (Net("n", (Pin(0), Pin(1))),), make_region(10.0))


def test_hpwl_two_pin_net():
    nl = two_pin((0.0, 0.0), (3.0, 4.0))
    assert hpwl(nl, nl.positions) == 7.0


def test_hpwl_single_pin_net_is_zero():
    inst = (Instance("a", 1.0, 1.0, x=2.0, y=3.0),)
    nl = Netlist(inst, (Net("n", (Pin(0, 0.5, 0.5),)),), make_region(10.0))
    assert hpwl(nl, nl.positions) == 0.0


def test_hpwl_matches_per_net_oracle():
    nl = random_netlist(50, 20, seed=4)
    pos = nl.positions
    expected = 0.0
    for net in nl.nets:
        pts = np.array([pos[p.instance] + (p.dx, p.dy) for p in net.pins])
        expected += net.weight * (np.ptp(pts[:, 0]) + np.ptp(pts[:, 1]))
    assert hpwl(nl, pos) == pytest.approx(expected, rel=1e-12)


def test_hpwl_translation_invariant():
    nl = random_netlist(30, 15, seed=2)
    shift = np.array([0.25, -1.5])
    assert hpwl(nl, nl.positions + shift) == pytest.approx(hpwl(nl, nl.positions), rel=1e-12, abs=1e-9)


def test_net_bboxes_empty():
    nl = Netlist((Instance("a", 1, 1),), (), make_region())
    assert net_bboxes(nl, nl.positions).shape == (0, 4)
    assert hpwl(nl, nl.positions) == 0.0


def test_cell_on_one_bin_fills_it():
    region = PlacementRegion(0, 0, 4, 4, 4, 4)
    nl = Netlist((Instance("a", 1.0, 1.0, x=2.0, y=1.0),), (), region)
    rho = bin_density(nl, nl.positions).density
    assert rho[2, 1] == pytest.approx(1.0)
    assert rho.sum() == pytest.approx(1.0)


def test_empty_netlist_density_is_zero():
    nl = Netlist((), (), make_region(8.0, 4))
    assert np.all(bin_density(nl, nl.positions).density == 0.0)


def test_straddling_cell_splits_area():
    region = PlacementRegion(0, 0, 4, 4, 4, 4)
    nl = Netlist((Instance("a", 1.0, 1.0, x=0.7, y=0.0),), (), region)
    rho = bin_density(nl, nl.positions).density
    assert rho[0, 0] == pytest.approx(0.3)
    assert rho[1, 0] == pytest.approx(0.7)


def test_density_mass_conservation_with_clipping():
    nl = random_netlist(60, 0, seed=7)
    pos = nl.positions.copy()
    pos[0] = (-1.0, -1.0)  # partly outside
    grid = BinGrid(nl.region, 13, 9)
    rho = bin_density(nl, pos, grid).density
    r = nl.region
    w = np.clip(pos[:, 0] + nl.widths, r.xmin, r.xmax) - np.clip(pos[:, 0], r.xmin, r.xmax)
    h = np.clip(pos[:, 1] + nl.heights, r.ymin, r.ymax) - np.clip(pos[:, 1], r.ymin, r.ymax)
    assert rho.sum() * grid.bin_area == pytest.approx(float((w * h).sum()), rel=1e-9)


def test_overflow_examples():
    grid = BinGrid(PlacementRegion(0, 0, 4, 4), 4, 4)
    uniform = DensityGrid(grid, np.full((4, 4), 0.5), movable_area=8.0)
    assert density_overflow(uniform, 0.5) == 0.0
    single = np.zeros((4, 4))
    single[1, 2] = 1.0
    one = DensityGrid(grid, single, movable_area=1.0)
    assert density_overflow(one, 0.5) == pytest.approx(0.5 * grid.bin_area / 1.0)
    assert density_overflow(DensityGrid(grid, np.zeros((4, 4)), 1.0), 0.9) == 0.0


def test_overflow_monotone_in_target():
    rng = np.random.default_rng(0)
    grid = BinGrid(PlacementRegion(0, 0, 10, 10), 8, 8)
    dg = DensityGrid(grid, rng.uniform(0, 1.5, (8, 8)), movable_area=40.0)
    assert density_overflow(dg, 1.0) <= density_overflow(dg, 0.5)


def test_overflow_rejects_bad_target():
    grid = BinGrid(PlacementRegion(0, 0, 1, 1), 1, 1)
    with pytest.raises(ConfigError):
        density_overflow(DensityGrid(grid, np.zeros((1, 1)), 1.0), 0.0)


def test_netlist_validation():
    region = make_region()
    with pytest.raises(NetlistError, match="unknown instance"):
        Netlist((Instance("a", 1, 1),), (Net("n", (Pin(3),)),), region)
    with pytest.raises(NetlistError, match="no pins"):
        Netlist((Instance("a", 1, 1),), (Net("n", ()),), region)
    with pytest.raises(NetlistError, match="empty placement region"):
        PlacementRegion(0, 0, 0, 1)


def test_clamp_centers_keeps_fixed_rows():
    region = make_region(10.0, 4)
    inst = (
        Instance("a", 2.0, 2.0),
        Instance("m", 4.0, 4.0, InstanceKind.FIXED_MACRO, x=-3.0, y=-3.0),
    )
    nl = Netlist(inst, (), region)
    centers = np.array([[-5.0, 20.0], [-1.0, -1.0]])
    out = nl.clamp_centers(centers)
    assert out[0].tolist() == [1.0, 9.0]
    assert out[1].tolist() == [-1.0, -1.0]


def test_fingerprint_tracks_geometry():
    a = random_netlist(10, 5, seed=1)
    b = random_netlist(10, 5, seed=1)
    c = random_netlist(10, 5, seed=2)
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != c.fingerprint()
