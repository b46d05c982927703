from __future__ import annotations

import numpy as np
import pytest

from conftest import make_region, random_netlist
from src.errors import ConfigError
from src.netlist import Instance, Netlist, hpwl
from src.wirelength import (
    lse_wirelength_and_grad,
    net_wirelength_terms,
    wa_wirelength_and_grad,
    wirelength_and_grad,
)


@pytest.mark.parametrize("model", ["WA", "LSE"])
def test_gradient_matches_finite_differences(model):
    nl = random_netlist(30, 40, seed=5)
    pos = nl.positions
    gamma = 2.0
    _, grad = wirelength_and_grad(nl, pos, gamma, model)
    eps = 1e-6
    for i in range(0, 30, 3):
        for axis in range(2):
            up, down = pos.copy(), pos.copy()
            up[i, axis] += eps
            down[i, axis] -= eps
            fd = (wirelength_and_grad(nl, up, gamma, model)[0] - wirelength_and_grad(nl, down, gamma, model)[0]) / (2 * eps)
            assert abs(fd - grad[i, axis]) <= 1e-5 * max(1.0, abs(fd))


def test_smooth_models_bracket_hpwl():
    nl = random_netlist(40, 60, seed=1)
    exact = hpwl(nl, nl.positions)
    wa, _ = wa_wirelength_and_grad(nl, nl.positions, 1.0)
    lse, _ = lse_wirelength_and_grad(nl, nl.positions, 1.0)
    assert wa <= exact + 1e-9
    assert lse >= exact - 1e-9


def test_wa_approaches_hpwl_as_gamma_shrinks():
    nl = random_netlist(40, 60, seed=2)
    exact = hpwl(nl, nl.positions)
    values = [wa_wirelength_and_grad(nl, nl.positions, g)[0] for g in (8.0, 4.0, 1.0, 0.25, 0.01)]
    assert np.all(np.diff(values) >= -1e-9)
    assert values[-1] == pytest.approx(exact, rel=1e-3)


def test_per_net_gradients_sum_to_zero():
    nl = random_netlist(20, 1, seed=3)
    _, grad = wa_wirelength_and_grad(nl, nl.positions, 1.5)
    assert np.allclose(grad.sum(axis=0), 0.0, atol=1e-12)


def test_terms_shape_and_no_nets():
    nl = random_netlist(10, 7, seed=0)
    assert net_wirelength_terms(nl, nl.positions, 1.0).shape == (7, 2)
    empty = Netlist((Instance("a", 1, 1),), (), make_region())
    value, grad = wa_wirelength_and_grad(empty, empty.positions, 1.0)
    assert value == 0.0 and grad.shape == (1, 2) and not grad.any()


def test_invalid_arguments():
    nl = random_netlist(5, 3, seed=0)
    with pytest.raises(ConfigError):
        wirelength_and_grad(nl, nl.positions, 0.0)
    with pytest.raises(ConfigError):
        wirelength_and_grad(nl, nl.positions, 1.0, "B2B")
