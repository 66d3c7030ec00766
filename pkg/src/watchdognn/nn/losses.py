"""Loss functions: value and gradient with respect to the prediction.

Sums are accumulated in float64; gradients come back in the prediction's
dtype.
"""

from __future__ import annotations

import numpy as np

CROSS_ENTROPY_EPS = 1e-7


class Loss:
    name = "loss"

    def value(self, pred: np.ndarray, target: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, pred: np.ndarray, target: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class MeanSquaredError(Loss):
    """Mean of squared differences over every element."""

    name = "mean_squared_error"

    def value(self, pred, target):
        diff = pred.astype(np.float64, copy=False) - target.astype(np.float64, copy=False)
        return float(np.mean(diff * diff))

    def grad(self, pred, target):
        return ((2.0 / pred.size) * (pred - target)).astype(pred.dtype, copy=False)


class CategoricalCrossEntropy(Loss):
    """Cross-entropy of probabilities against one-hot targets, mean per sample.

    Predicted probabilities are clamped to [eps, 1 - eps] before the log, so
    the loss stays finite even on saturated outputs; the gradient is zero
    where the clamp is active.
    """

    name = "categorical_cross_entropy"

    def value(self, pred, target):
        p = np.clip(pred.astype(np.float64, copy=False), CROSS_ENTROPY_EPS, 1.0 - CROSS_ENTROPY_EPS)
        n = pred.shape[0] if pred.ndim > 1 else 1
        return float(-(target * np.log(p)).sum() / n)

    def grad(self, pred, target):
        n = pred.shape[0] if pred.ndim > 1 else 1
        p = np.clip(pred, CROSS_ENTROPY_EPS, 1.0 - CROSS_ENTROPY_EPS)
        inside = (pred > CROSS_ENTROPY_EPS) & (pred < 1.0 - CROSS_ENTROPY_EPS)
        g = np.where(inside, -target / p, 0.0) / n
        return g.astype(pred.dtype, copy=False)


LOSSES: dict[str, type[Loss]] = {
    MeanSquaredError.name: MeanSquaredError,
    CategoricalCrossEntropy.name: CategoricalCrossEntropy,
}


def resolve_loss(loss: Loss | str) -> Loss:
    if isinstance(loss, Loss):
        return loss
    try:
        return LOSSES[loss]()
    except KeyError:
        raise ValueError(f"unknown loss {loss!r}; known: {sorted(LOSSES)}") from None
