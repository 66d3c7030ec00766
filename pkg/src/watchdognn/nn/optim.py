"""Gradient-descent optimizers operating in place on a Network."""

from __future__ import annotations

import numpy as np

from ..errors import NumericError
from .network import Network


def _check_finite(grads, network):
    for i, layer_grads in enumerate(grads):
        for name, g in layer_grads.items():
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient for layer {i} "
                                   f"({network.specs[i].kind}) parameter {name!r}")


class Sgd:
    """Plain gradient descent: w -= lr * g."""

    def __init__(self, learning_rate: float = 0.01):
        self.learning_rate = learning_rate

    def step(self, network: Network, grads: list[dict[str, np.ndarray]]) -> Network:
        _check_finite(grads, network)
        for layer, layer_grads in zip(network.layers, grads):
            for name, g in layer_grads.items():
                layer.params[name] -= np.asarray(self.learning_rate * g, dtype=layer.params[name].dtype)
        return network


class Adam:
    """Adaptive moment estimation with bias correction.

    First and second moment estimates are kept per parameter tensor; the
    first post-init step moves each weight by about learning_rate for a
    constant gradient.
    """

    def __init__(self, learning_rate: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[tuple[int, str], np.ndarray] = {}
        self._v: dict[tuple[int, str], np.ndarray] = {}

    def step(self, network: Network, grads: list[dict[str, np.ndarray]]) -> Network:
        _check_finite(grads, network)
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        scale = self.learning_rate * np.sqrt(1.0 - b2 ** self.t) / (1.0 - b1 ** self.t)
        for i, (layer, layer_grads) in enumerate(zip(network.layers, grads)):
            for name, g in layer_grads.items():
                key = (i, name)
                p = layer.params[name]
                if key not in self._m:
                    self._m[key] = np.zeros_like(p)
                    self._v[key] = np.zeros_like(p)
                m = self._m[key]
                v = self._v[key]
                m += (1.0 - b1) * (g - m)
                v += (1.0 - b2) * (g * g - v)
                p -= (scale * m / (np.sqrt(v) + self.eps * np.sqrt(1.0 - b2 ** self.t))).astype(p.dtype)
        return network


OPTIMIZERS = {"sgd": Sgd, "adam": Adam}


def make_optimizer(name: str, learning_rate: float):
    try:
        return OPTIMIZERS[name](learning_rate)
    except KeyError:
        raise ValueError(f"unknown optimizer {name!r}; known: {sorted(OPTIMIZERS)}") from None
