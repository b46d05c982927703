from __future__ import annotations

"""Smooth wirelength models (weighted-average and log-sum-exp) with gradients."""

from typing import Callable, Dict, Tuple

import numpy as np

from .errors import ConfigError
from .netlist import Netlist

WIRELENGTH_MODELS = ("WA", "LSE")


def _segment_bounds(values: np.ndarray, starts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return np.minimum.reduceat(values, starts), np.maximum.reduceat(values, starts)


def _axis_wa(coord: np.ndarray, pin_net: np.ndarray, starts: np.ndarray, gamma: float) -> Tuple[np.ndarray, np.ndarray]:
    """Per-net ``x+ - x-`` and per-pin gradient along one axis."""
    lo, hi = _segment_bounds(coord, starts)
    e_pos = np.exp((coord - hi[pin_net]) / gamma)
    e_neg = np.exp((lo[pin_net] - coord) / gamma)
    s_pos = np.add.reduceat(e_pos, starts)
    s_neg = np.add.reduceat(e_neg, starts)
    x_pos = np.add.reduceat(coord * e_pos, starts) / s_pos
    x_neg = np.add.reduceat(coord * e_neg, starts) / s_neg
    grad = (
        e_pos / s_pos[pin_net] * (1.0 + (coord - x_pos[pin_net]) / gamma)
        - e_neg / s_neg[pin_net] * (1.0 - (coord - x_neg[pin_net]) / gamma)
    )
    return x_pos - x_neg, grad


def _axis_lse(coord: np.ndarray, pin_net: np.ndarray, starts: np.ndarray, gamma: float) -> Tuple[np.ndarray, np.ndarray]:
    lo, hi = _segment_bounds(coord, starts)
    e_pos = np.exp((coord - hi[pin_net]) / gamma)
    e_neg = np.exp((lo[pin_net] - coord) / gamma)
    s_pos = np.add.reduceat(e_pos, starts)
    s_neg = np.add.reduceat(e_neg, starts)
    value = (hi + gamma * np.log(s_pos)) - (lo - gamma * np.log(s_neg))
    grad = e_pos / s_pos[pin_net] - e_neg / s_neg[pin_net]
    return value, grad


_AXIS: Dict[str, Callable] = {"WA": _axis_wa, "LSE": _axis_lse}


def net_wirelength_terms(netlist: Netlist, positions: np.ndarray, gamma: float, model: str = "WA") -> np.ndarray:
    """``(E, 2)`` unweighted per-net, per-axis smooth spans."""
    value, _ = _evaluate(netlist, positions, gamma, model)
    return value


def _evaluate(netlist: Netlist, positions: np.ndarray, gamma: float, model: str) -> Tuple[np.ndarray, np.ndarray]:
    if model not in _AXIS:
        raise ConfigError(f"wirelength model must be one of {WIRELENGTH_MODELS}, got {model!r}")
    if not gamma > 0:
        raise ConfigError(f"wirelength smoothing gamma must be > 0, got {gamma}")
    if netlist.num_nets == 0:
        return np.zeros((0, 2)), np.zeros((0, 2))
    pins = netlist.pin_positions(positions)
    starts = netlist.net_start[:-1]
    fn = _AXIS[model]
    vx, gx = fn(pins[:, 0], netlist.pin_net, starts, gamma)
    vy, gy = fn(pins[:, 1], netlist.pin_net, starts, gamma)
    return np.column_stack([vx, vy]), np.column_stack([gx, gy])


def wirelength_and_grad(
    netlist: Netlist,
    positions: np.ndarray,
    gamma: float,
    model: str = "WA",
) -> Tuple[float, np.ndarray]:
    """Net-weighted smooth wirelength and its gradient per instance (``(N, 2)``)."""
    value, pin_grad = _evaluate(netlist, positions, gamma, model)
    grad = np.zeros((netlist.num_instances, 2))
    if value.size == 0:
        return 0.0, grad
    w = netlist.net_weight
    pin_grad = pin_grad * w[netlist.pin_net][:, None]
    np.add.at(grad, netlist.pin_instance, pin_grad)
    return float(np.dot(w, value.sum(axis=1))), grad


def wa_wirelength_and_grad(netlist: Netlist, positions: np.ndarray, gamma: float) -> Tuple[float, np.ndarray]:
    return wirelength_and_grad(netlist, positions, gamma, "WA")


def lse_wirelength_and_grad(netlist: Netlist, positions: np.ndarray, gamma: float) -> Tuple[float, np.ndarray]:
    return wirelength_and_grad(netlist, positions, gamma, "LSE")
