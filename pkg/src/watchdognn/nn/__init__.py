"""Minimal differentiable neural-network engine built on numpy arrays."""

from .gradcheck import grad_check
from .layers import (
    DEFAULT_DTYPE,
    LayerSpec,
    conv2d,
    conv2d_transpose,
    dense,
    dropout,
    flatten,
    max_pool2d,
    relu,
    reshape,
    sigmoid,
    softmax,
)
from .losses import LOSSES, CategoricalCrossEntropy, Loss, MeanSquaredError, resolve_loss
from .network import Network
from .optim import Adam, Sgd, make_optimizer

__all__ = [
    "DEFAULT_DTYPE",
    "LayerSpec",
    "Network",
    "Loss",
    "MeanSquaredError",
    "CategoricalCrossEntropy",
    "LOSSES",
    "resolve_loss",
    "Adam",
    "Sgd",
    "make_optimizer",
    "grad_check",
    "conv2d",
    "conv2d_transpose",
    "max_pool2d",
    "dense",
    "flatten",
    "reshape",
    "dropout",
    "relu",
    "sigmoid",
    "softmax",
]
