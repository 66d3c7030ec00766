"""Gradient verification by central finite differences.

The check runs on a float64 copy of the network with every dropout mask
frozen, so the loss surface is smooth and deterministic while each parameter
entry is perturbed.
"""

from __future__ import annotations

import numpy as np

from .losses import Loss, resolve_loss
from .network import Network

RELATIVE_FLOOR = 1e-8


def grad_check(network: Network, x: np.ndarray, target: np.ndarray,
               loss: Loss | str, h: float = 1e-3, mask_seed: int = 0) -> float:
    """Max relative error between analytic and numeric parameter gradients.

    Relative error per entry is |analytic - numeric| / max(|analytic|,
    |numeric|, 1e-8) with the numeric side from central differences of the
    full train-mode loss. Intended for small networks; every parameter entry
    costs two forward passes.
    """
    if h <= 0:
        raise ValueError(f"step size h must be positive, got {h}")
    loss = resolve_loss(loss)
    net = network.copy(dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.shape == net.input_shape:
        x = x[None]
    target = np.asarray(target, dtype=np.float64)

    mask_rng = np.random.default_rng(mask_seed)
    frozen = []
    for layer in net.layers:
        if hasattr(layer, "frozen_mask") and layer.frozen_mask is None:
            layer.frozen_mask = mask_rng.random((x.shape[0],) + layer.in_shape) >= layer.rate
            frozen.append(layer)

    def loss_at() -> float:
        return loss.value(net.forward(x, mode="train"), target)

    try:
        _, grads = net.backward(x, target, loss)
        worst = 0.0
        for i, layer in enumerate(net.layers):
            for name, param in layer.params.items():
                analytic = grads[i][name]
                flat = param.ravel()
                for j in range(flat.size):
                    orig = flat[j]
                    flat[j] = orig + h
                    up = loss_at()
                    flat[j] = orig - h
                    down = loss_at()
                    flat[j] = orig
                    numeric = (up - down) / (2.0 * h)
                    a = analytic.ravel()[j]
                    err = abs(a - numeric) / max(abs(a), abs(numeric), RELATIVE_FLOOR)
                    worst = max(worst, err)
        return worst
    finally:
        for layer in frozen:
            layer.frozen_mask = None
