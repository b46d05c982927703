from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from src.netlist import Instance, InstanceKind, Net, Netlist, Pin, PlacementRegion
from src.synthetic import SyntheticSpec, generate_synthetic

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def tiny_aux() -> Path:
    return FIXTURES / "tiny" / "tiny.aux"


@pytest.fixture
def excerpt_aux() -> Path:
    return FIXTURES / "ispd_excerpt" / "excerpt.aux"


def make_region(size: float = 100.0, bins: int = 16) -> PlacementRegion:
    return PlacementRegion(0.0, 0.0, size, size, bins, bins)


def random_netlist(
    num_cells: int,
    num_nets: int,
    *,
    seed: int = 0,
    size: float = 100.0,
    max_degree: int = 5,
    macros: int = 0,
) -> Netlist:
    """Random cells with random nets; pins at random offsets inside each cell."""
    rng = np.random.default_rng(seed)
    instances = []
    for i in range(num_cells):
        w, h = rng.uniform(1.0, 4.0, size=2)
        x, y = rng.uniform(0.0, size - 4.0, size=2)
        instances.append(Instance(f"c{i}", float(w), float(h), InstanceKind.MOVABLE_CELL, float(x), float(y)))
    for j in range(macros):
        instances.append(Instance(f"m{j}", 20.0, 20.0, InstanceKind.FIXED_MACRO, 10.0 + 40.0 * j, 40.0))
    nets = []
    n = len(instances)
    for e in range(num_nets):
        degree = int(rng.integers(2, max_degree + 1))
        ids = rng.choice(n, size=min(degree, n), replace=False)
        pins = tuple(
            Pin(int(i), float(rng.uniform(0, instances[i].width)), float(rng.uniform(0, instances[i].height)))
            for i in ids
        )
        nets.append(Net(f"n{e}", pins, float(rng.uniform(0.5, 2.0))))
    return Netlist(tuple(instances), tuple(nets), make_region(size), f"rand{seed}")


@pytest.fixture
def small_design():
    return generate_synthetic(SyntheticSpec(num_cells=120, num_macros=2, num_io=8, seed=3))


@pytest.fixture
def central_macro_design():
    """Builder for one-macro designs with the macro at the region center."""

    def build(seed: int = 1, num_cells: int = 400):
        return generate_synthetic(
            SyntheticSpec(num_cells=num_cells, num_macros=1, central_macro=True, num_io=32, seed=seed)
        )

    return build
