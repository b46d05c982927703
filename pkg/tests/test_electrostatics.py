from __future__ import annotations

import numpy as np
import pytest

from conftest import random_netlist
from src.electrostatics import (
    density_gradient,
    interpolate_field,
    movable_density,
    poisson_solve,
    smoothed_density,
    spectral_laplacian,
)
from src.errors import ConfigError
from src.macro_schedule import fixed_macro_density
from src.netlist import BinGrid, Instance, InstanceKind, Netlist, PlacementRegion


def grid64() -> BinGrid:
    return BinGrid(PlacementRegion(0, 0, 64, 64), 64, 64)


def test_single_cosine_mode():
    grid = BinGrid(PlacementRegion(0, 0, 32, 16), 32, 16)
    i = np.arange(32) + 0.5
    u = 3
    mode = np.cos(np.pi * u * i / 32)[:, None] * np.ones((1, 16))
    sol = poisson_solve(0.7 + 0.2 * mode, grid, target_density=0.7, epsilon=2.0)
    w = np.pi * u / 32.0
    assert np.allclose(sol.phi, 0.2 * mode / (2.0 * w * w), atol=1e-12)
    x = i * 1.0
    expected_ex = -0.2 * np.sin(w * x) / (2.0 * w)
    assert np.allclose(sol.field_x, expected_ex[:, None], atol=1e-12)
    assert np.allclose(sol.field_y, 0.0, atol=1e-12)


def test_residual_of_random_source():
    grid = BinGrid(PlacementRegion(0, 0, 40, 24), 20, 12)
    rho = np.random.default_rng(0).uniform(0, 2, (20, 12))
    sol = poisson_solve(rho, grid, epsilon=0.5)
    assert abs(sol.source.mean()) < 1e-12
    assert np.allclose(spectral_laplacian(sol.phi, grid), -sol.source / 0.5, atol=1e-9)
    assert sol.energy >= 0.0


def test_grid_and_shape_checks():
    small = BinGrid(PlacementRegion(0, 0, 10, 10), 4, 16)
    with pytest.raises(ConfigError):
        poisson_solve(np.zeros((4, 16)), small)
    with pytest.raises(ConfigError):
        poisson_solve(np.zeros((8, 8)), grid64())
    with pytest.raises(ConfigError):
        poisson_solve(np.zeros((64, 64)), grid64(), epsilon=0.0)


def test_movable_density_conserves_area():
    nl = random_netlist(50, 0, seed=1, size=64.0)
    grid = BinGrid(nl.region, 16, 16)
    rho = movable_density(nl, nl.positions, grid)
    assert rho.sum() * grid.bin_area == pytest.approx(nl.movable_area)


def test_smoothed_density_adds_scaled_footprint():
    inst = (Instance("m", 16.0, 16.0, InstanceKind.FIXED_MACRO, 16.0, 16.0),)
    nl = Netlist(inst, (), PlacementRegion(0, 0, 64, 64))
    dg = smoothed_density(nl, nl.positions, BinGrid(nl.region, 8, 8), None, 0, target_density=0.8)
    assert dg.density.max() == pytest.approx(0.8)
    assert dg.density.sum() * 64.0 == pytest.approx(0.8 * 256.0)


def test_interpolation_hits_bin_centers():
    grid = BinGrid(PlacementRegion(0, 0, 8, 8), 8, 8)
    values = np.arange(64.0).reshape(8, 8)
    pts = np.array([[0.5, 0.5], [3.5, 6.5], [4.0, 6.5], [-3.0, 0.5]])
    out = interpolate_field(values, grid, pts)
    assert out.tolist() == pytest.approx([0.0, 30.0, 34.0, 0.0])


def test_density_gradient_matches_finite_differences():
    # a full-height fixed block on the left gives a potential varying in x only
    inst = (
        Instance("c", 0.5, 0.5, x=35.75, y=31.75),
        Instance("m", 16.0, 64.0, InstanceKind.FIXED_MACRO, 0.0, 0.0),
    )
    nl = Netlist(inst, (), PlacementRegion(0, 0, 64, 64))
    grid = grid64()
    fixed = poisson_solve(fixed_macro_density(nl, grid, None, 0), grid, target_density=0.0)

    def interaction(pos):
        return float(np.sum(movable_density(nl, pos, grid) * fixed.phi) * grid.bin_area)

    eps = 1e-3
    up, down = nl.positions.copy(), nl.positions.copy()
    up[0, 0] += eps
    down[0, 0] -= eps
    fd = (interaction(up) - interaction(down)) / (2 * eps)
    grad = density_gradient(fixed, grid, nl, nl.positions)
    assert grad[0, 0] < 0
    assert grad[0, 0] == pytest.approx(fd, rel=5e-3)
    assert grad[1].tolist() == [0.0, 0.0]


def test_centro_symmetric_layout_has_zero_net_force():
    size = np.array([2.0, 1.0])
    p = np.array([[10.0, 20.0], [30.5, 7.25], [50.0, 44.0]])
    q = 64.0 - p - size
    inst = tuple(Instance(f"a{i}", *size, x=x, y=y) for i, (x, y) in enumerate(p))
    inst += tuple(Instance(f"b{i}", *size, x=x, y=y) for i, (x, y) in enumerate(q))
    inst += (Instance("m", 12.0, 12.0, InstanceKind.FIXED_MACRO, 26.0, 26.0),)
    nl = Netlist(inst, (), PlacementRegion(0, 0, 64, 64))
    grid = BinGrid(nl.region, 32, 32)
    dg = smoothed_density(nl, nl.positions, grid, None, 0, target_density=0.9)
    sol = poisson_solve(dg.density, grid, 0.9)
    grad = density_gradient(sol, grid, nl, nl.positions)
    assert np.abs(grad).max() > 0
    assert np.allclose(grad.sum(axis=0), 0.0, atol=1e-9 * np.abs(grad).max())
