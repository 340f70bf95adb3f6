"""Parameter initialisation and the two-layer MLP shared by all models."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad


def init_linear(params: dict, rng: np.random.Generator, name: str, fan_in: int, fan_out: int, bias: bool = True):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases."""
    bound = 1.0 / np.sqrt(fan_in)
    params[f"{name}.w"] = rng.uniform(-bound, bound, (fan_in, fan_out))
    if bias:
        params[f"{name}.b"] = rng.uniform(-bound, bound, fan_out)


def init_mlp2(params: dict, rng, name: str, n_in: int, hidden: int, n_out: int):
    init_linear(params, rng, f"{name}.0", n_in, hidden)
    init_linear(params, rng, f"{name}.1", hidden, n_out)


def dense(p: dict, name: str, x):
    return ad.linear(x, p[f"{name}.w"], p.get(f"{name}.b"))


def mlp2(p: dict, name: str, x):
    """``relu(x W0 + b0) W1 + b1``."""
    return dense(p, f"{name}.1", ad.relu(dense(p, f"{name}.0", x)))


def tile_const(x: np.ndarray, n: int) -> np.ndarray:
    return np.broadcast_to(x, (n,) + x.shape).copy()
