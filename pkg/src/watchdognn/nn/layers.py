"""Sequential network layers with explicit forward/backward passes.

Every layer maps a declared input shape (without the batch dimension) to a
declared output shape at construction time, so ill-formed stacks fail before
any data flows. Arrays are channels-last: images are [N, H, W, C].

Convolution products are accumulated in float64 regardless of the parameter
dtype; results are cast back to the layer dtype.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..errors import ShapeError

DEFAULT_DTYPE = np.float32


@dataclass(frozen=True)
class LayerSpec:
    """Declarative description of one layer: a kind plus its parameters."""

    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ShapeError(f"unknown layer kind {self.kind!r}")


# Spec factories; these are the public vocabulary for describing networks.

def conv2d(filters: int, kernel_size: int = 3, stride: int = 1,
           padding: str = "same") -> LayerSpec:
    return LayerSpec("Conv2D", {"filters": filters, "kernel_size": kernel_size,
                                "stride": stride, "padding": padding})


def conv2d_transpose(filters: int, kernel_size: int = 3, stride: int = 1,
                     padding: str = "same") -> LayerSpec:
    return LayerSpec("TransposedConv2D", {"filters": filters, "kernel_size": kernel_size,
                                          "stride": stride, "padding": padding})


def max_pool2d(pool_size: int = 2, stride: int | None = None) -> LayerSpec:
    return LayerSpec("MaxPool2D", {"pool_size": pool_size,
                                   "stride": pool_size if stride is None else stride})


def dense(units: int) -> LayerSpec:
    return LayerSpec("Dense", {"units": units})


def flatten() -> LayerSpec:
    return LayerSpec("Flatten", {})


def reshape(target_shape: tuple[int, ...]) -> LayerSpec:
    return LayerSpec("Reshape", {"target_shape": tuple(int(d) for d in target_shape)})


def dropout(rate: float) -> LayerSpec:
    return LayerSpec("Dropout", {"rate": rate})


def relu() -> LayerSpec:
    return LayerSpec("ReLU", {})


def sigmoid() -> LayerSpec:
    return LayerSpec("Sigmoid", {})


def softmax() -> LayerSpec:
    return LayerSpec("Softmax", {})


def _matmul_f64(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with float64 accumulation."""
    return a.astype(np.float64, copy=False) @ b.astype(np.float64, copy=False)


def _conv_geometry(size: int, kernel: int, stride: int, padding: str) -> tuple[int, int, int]:
    """Output size and (before, after) padding along one spatial axis."""
    if padding == "same":
        out = -(-size // stride)  # ceil division
        total = max((out - 1) * stride + kernel - size, 0)
        return out, total // 2, total - total // 2
    if padding == "valid":
        if size < kernel:
            raise ShapeError(f"valid convolution needs input >= kernel, got {size} < {kernel}")
        return (size - kernel) // stride + 1, 0, 0
    raise ShapeError(f"padding must be 'same' or 'valid', got {padding!r}")


def _im2col(x_pad: np.ndarray, kernel: int, stride: int, h_out: int, w_out: int) -> np.ndarray:
    """Extract convolution patches as a [N*h_out*w_out, kernel*kernel*C] matrix."""
    n, _, _, c = x_pad.shape
    cols = np.empty((n, h_out, w_out, kernel, kernel, c), dtype=x_pad.dtype)
    for i in range(kernel):
        for j in range(kernel):
            cols[:, :, :, i, j, :] = x_pad[:, i:i + stride * h_out:stride,
                                           j:j + stride * w_out:stride, :]
    return cols.reshape(n * h_out * w_out, kernel * kernel * c)


def _col2im(cols: np.ndarray, pad_shape: tuple[int, ...], kernel: int, stride: int,
            h_out: int, w_out: int) -> np.ndarray:
    """Scatter-add patch values back onto the padded image grid."""
    n, hp, wp, c = pad_shape
    out = np.zeros(pad_shape, dtype=cols.dtype)
    patches = cols.reshape(n, h_out, w_out, kernel, kernel, c)
    for i in range(kernel):
        for j in range(kernel):
            out[:, i:i + stride * h_out:stride, j:j + stride * w_out:stride, :] += \
                patches[:, :, :, i, j, :]
    return out


def _fan_in_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int,
                    dtype) -> np.ndarray:
    """Uniform init with variance 1/fan_in (limit sqrt(3/fan_in))."""
    limit = np.sqrt(3.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    """Base layer: holds the spec, resolved shapes, parameters, and gradients.

    Subclasses cache whatever the backward pass needs only when ``train`` is
    True; inference forwards write no instance state and are therefore safe
    to run concurrently.
    """

    has_params = False

    def __init__(self, spec: LayerSpec, in_shape: tuple[int, ...], rng, dtype):
        self.spec = spec
        self.in_shape = tuple(in_shape)
        self.dtype = np.dtype(dtype)
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.out_shape: tuple[int, ...] = self._build(rng)

    def _build(self, rng) -> tuple[int, ...]:
        raise NotImplementedError

    def forward(self, x: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        """Consume dL/d(output), fill ``self.grads``, return dL/d(input)."""
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.in_shape} -> {self.out_shape})"


class Conv2D(Layer):
    """2D convolution over [N, H, W, C] inputs, weights [k, k, C, filters]."""

    has_params = True

    def _build(self, rng):
        p = self.spec.params
        self.filters = int(p["filters"])
        self.kernel = int(p["kernel_size"])
        self.stride = int(p["stride"])
        self.padding = p["padding"]
        if self.filters < 1 or self.kernel < 1 or self.stride < 1:
            raise ShapeError(f"Conv2D needs positive filters/kernel/stride, got {p}")
        if len(self.in_shape) != 3:
            raise ShapeError(f"Conv2D expects a [H, W, C] input, got {self.in_shape}")
        h, w, c = self.in_shape
        self.h_out, self.pad_top, self.pad_bot = _conv_geometry(h, self.kernel, self.stride, self.padding)
        self.w_out, self.pad_left, self.pad_right = _conv_geometry(w, self.kernel, self.stride, self.padding)
        fan_in = self.kernel * self.kernel * c
        self.params["w"] = _fan_in_uniform(rng, (self.kernel, self.kernel, c, self.filters),
                                           fan_in, self.dtype)
        self.params["b"] = np.zeros(self.filters, dtype=self.dtype)
        return (self.h_out, self.w_out, self.filters)

    def _pad(self, x):
        if self.pad_top or self.pad_bot or self.pad_left or self.pad_right:
            return np.pad(x, ((0, 0), (self.pad_top, self.pad_bot),
                              (self.pad_left, self.pad_right), (0, 0)))
        return x

    def forward(self, x, train=False, rng=None):
        n = x.shape[0]
        x_pad = self._pad(x)
        cols = _im2col(x_pad, self.kernel, self.stride, self.h_out, self.w_out)
        cols64 = cols.astype(np.float64, copy=False)
        w_mat = self.params["w"].reshape(-1, self.filters)
        y = _matmul_f64(cols64, w_mat).astype(self.dtype) + self.params["b"]
        if train:
            self._cols64 = cols64
            self._pad_shape = x_pad.shape
        return y.reshape(n, self.h_out, self.w_out, self.filters)

    def backward(self, grad_out):
        n = grad_out.shape[0]
        g_mat = grad_out.reshape(-1, self.filters).astype(np.float64, copy=False)
        w_mat = self.params["w"].reshape(-1, self.filters)
        self.grads["w"] = (self._cols64.T @ g_mat).astype(self.dtype).reshape(self.params["w"].shape)
        self.grads["b"] = g_mat.sum(axis=0).astype(self.dtype)
        d_cols = _matmul_f64(g_mat, w_mat.T)
        dx_pad = _col2im(d_cols, self._pad_shape, self.kernel, self.stride,
                         self.h_out, self.w_out)
        h, w, _ = self.in_shape
        dx = dx_pad[:, self.pad_top:self.pad_top + h, self.pad_left:self.pad_left + w, :]
        return dx.astype(self.dtype)


class TransposedConv2D(Layer):
    """Transposed (fractionally strided) convolution: the adjoint of Conv2D.

    The forward pass is the input-gradient of a mirror convolution that maps
    this layer's output back to its input; 'same' padding therefore upsamples
    H -> H*stride exactly. Weights are [k, k, filters, C_in].
    """

    has_params = True

    def _build(self, rng):
        p = self.spec.params
        self.filters = int(p["filters"])
        self.kernel = int(p["kernel_size"])
        self.stride = int(p["stride"])
        self.padding = p["padding"]
        if self.filters < 1 or self.kernel < 1 or self.stride < 1:
            raise ShapeError(f"TransposedConv2D needs positive filters/kernel/stride, got {p}")
        if len(self.in_shape) != 3:
            raise ShapeError(f"TransposedConv2D expects a [H, W, C] input, got {self.in_shape}")
        h, w, c = self.in_shape
        if self.padding == "same":
            self.h_out, self.w_out = h * self.stride, w * self.stride
        elif self.padding == "valid":
            self.h_out = (h - 1) * self.stride + self.kernel
            self.w_out = (w - 1) * self.stride + self.kernel
        else:
            raise ShapeError(f"padding must be 'same' or 'valid', got {self.padding!r}")
        # Geometry of the mirror convolution (out_shape -> in_shape).
        h_chk, self.pad_top, self.pad_bot = _conv_geometry(self.h_out, self.kernel,
                                                           self.stride, self.padding)
        w_chk, self.pad_left, self.pad_right = _conv_geometry(self.w_out, self.kernel,
                                                              self.stride, self.padding)
        if (h_chk, w_chk) != (h, w):
            raise ShapeError(f"TransposedConv2D geometry is inconsistent: mirror of "
                             f"({self.h_out}, {self.w_out}) gives ({h_chk}, {w_chk}), "
                             f"expected ({h}, {w})")
        fan_in = self.kernel * self.kernel * c
        self.params["w"] = _fan_in_uniform(rng, (self.kernel, self.kernel, self.filters, c),
                                           fan_in, self.dtype)
        self.params["b"] = np.zeros(self.filters, dtype=self.dtype)
        return (self.h_out, self.w_out, self.filters)

    def _pad_shape_for(self, n):
        hp = self.h_out + self.pad_top + self.pad_bot
        wp = self.w_out + self.pad_left + self.pad_right
        return (n, hp, wp, self.filters)

    def forward(self, x, train=False, rng=None):
        n, h, w, c = x.shape
        x_mat = x.reshape(n * h * w, c).astype(np.float64, copy=False)
        w_mat = self.params["w"].reshape(-1, c)  # [k*k*filters, C_in]
        cols = _matmul_f64(x_mat, w_mat.T)
        y_pad = _col2im(cols, self._pad_shape_for(n), self.kernel, self.stride, h, w)
        y = y_pad[:, self.pad_top:self.pad_top + self.h_out,
                  self.pad_left:self.pad_left + self.w_out, :]
        y = y.astype(self.dtype) + self.params["b"]
        if train:
            self._x_mat64 = x_mat
        return y

    def backward(self, grad_out):
        n = grad_out.shape[0]
        h, w, c = self.in_shape
        g_pad = np.pad(grad_out, ((0, 0), (self.pad_top, self.pad_bot),
                                  (self.pad_left, self.pad_right), (0, 0)))
        g_cols = _im2col(g_pad, self.kernel, self.stride, h, w).astype(np.float64, copy=False)
        w_mat = self.params["w"].reshape(-1, c)
        self.grads["w"] = (g_cols.T @ self._x_mat64).astype(self.dtype).reshape(self.params["w"].shape)
        self.grads["b"] = grad_out.sum(axis=(0, 1, 2), dtype=np.float64).astype(self.dtype)
        dx = _matmul_f64(g_cols, w_mat).astype(self.dtype)
        return dx.reshape(n, h, w, c)


class MaxPool2D(Layer):
    """Max pooling with valid padding; ties route the gradient to the first max."""

    def _build(self, rng):
        p = self.spec.params
        self.pool = int(p["pool_size"])
        self.stride = int(p["stride"])
        if self.pool < 1 or self.stride < 1:
            raise ShapeError(f"MaxPool2D needs positive pool/stride, got {p}")
        if len(self.in_shape) != 3:
            raise ShapeError(f"MaxPool2D expects a [H, W, C] input, got {self.in_shape}")
        h, w, c = self.in_shape
        if h < self.pool or w < self.pool:
            raise ShapeError(f"MaxPool2D window {self.pool} exceeds input {self.in_shape}")
        self.h_out = (h - self.pool) // self.stride + 1
        self.w_out = (w - self.pool) // self.stride + 1
        return (self.h_out, self.w_out, c)

    def _windows(self, x):
        n, _, _, c = x.shape
        win = np.empty((n, self.h_out, self.w_out, c, self.pool * self.pool), dtype=x.dtype)
        for i in range(self.pool):
            for j in range(self.pool):
                win[..., i * self.pool + j] = x[:, i:i + self.stride * self.h_out:self.stride,
                                                j:j + self.stride * self.w_out:self.stride, :]
        return win

    def forward(self, x, train=False, rng=None):
        win = self._windows(x)
        if train:
            self._argmax = win.argmax(axis=-1)
            self._x_shape = x.shape
        return win.max(axis=-1)

    def backward(self, grad_out):
        n, _, _, c = self._x_shape
        g_win = np.zeros((n, self.h_out, self.w_out, c, self.pool * self.pool),
                         dtype=grad_out.dtype)
        np.put_along_axis(g_win, self._argmax[..., None], grad_out[..., None], axis=-1)
        dx = np.zeros(self._x_shape, dtype=grad_out.dtype)
        for i in range(self.pool):
            for j in range(self.pool):
                dx[:, i:i + self.stride * self.h_out:self.stride,
                   j:j + self.stride * self.w_out:self.stride, :] += g_win[..., i * self.pool + j]
        return dx


class Dense(Layer):
    """Fully connected layer on flat [N, D] inputs."""

    has_params = True

    def _build(self, rng):
        self.units = int(self.spec.params["units"])
        if self.units < 1:
            raise ShapeError(f"Dense needs positive units, got {self.units}")
        if len(self.in_shape) != 1:
            raise ShapeError(f"Dense expects a flat input, got {self.in_shape}; "
                             "add a Flatten layer first")
        d = self.in_shape[0]
        self.params["w"] = _fan_in_uniform(rng, (d, self.units), d, self.dtype)
        self.params["b"] = np.zeros(self.units, dtype=self.dtype)
        return (self.units,)

    def forward(self, x, train=False, rng=None):
        if train:
            self._x = x
        return x @ self.params["w"] + self.params["b"]

    def backward(self, grad_out):
        self.grads["w"] = self._x.T @ grad_out
        self.grads["b"] = grad_out.sum(axis=0, dtype=np.float64).astype(self.dtype)
        return grad_out @ self.params["w"].T


class Flatten(Layer):
    def _build(self, rng):
        return (int(np.prod(self.in_shape)),)

    def forward(self, x, train=False, rng=None):
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        return grad_out.reshape((grad_out.shape[0],) + self.in_shape)


class Reshape(Layer):
    def _build(self, rng):
        target = tuple(self.spec.params["target_shape"])
        if int(np.prod(target)) != int(np.prod(self.in_shape)):
            raise ShapeError(f"Reshape target {target} has {int(np.prod(target))} elements, "
                             f"input {self.in_shape} has {int(np.prod(self.in_shape))}")
        return target

    def forward(self, x, train=False, rng=None):
        return x.reshape((x.shape[0],) + self.out_shape)

    def backward(self, grad_out):
        return grad_out.reshape((grad_out.shape[0],) + self.in_shape)


class Dropout(Layer):
    """Inverted dropout: activations scaled by 1/(1-rate) at train time.

    ``frozen_mask`` pins the keep-mask for gradient checking; inference is
    always the identity.
    """

    def _build(self, rng):
        self.rate = float(self.spec.params["rate"])
        if not 0.0 <= self.rate < 1.0:
            raise ShapeError(f"dropout rate must be in [0, 1), got {self.rate}")
        self.frozen_mask: np.ndarray | None = None
        return self.in_shape

    def forward(self, x, train=False, rng=None):
        if not train or self.rate == 0.0:
            return x
        if self.frozen_mask is not None:
            mask = self.frozen_mask
        else:
            if rng is None:
                raise ValueError("Dropout in train mode needs an rng (or a frozen mask)")
            mask = rng.random(x.shape) >= self.rate
        self._mask = mask
        return x * (mask.astype(x.dtype) / (1.0 - self.rate))

    def backward(self, grad_out):
        return grad_out * (self._mask.astype(grad_out.dtype) / (1.0 - self.rate))


class ReLU(Layer):
    def _build(self, rng):
        return self.in_shape

    def forward(self, x, train=False, rng=None):
        if train:
            self._active = x > 0
        return np.maximum(x, 0)

    def backward(self, grad_out):
        return grad_out * self._active


class Sigmoid(Layer):
    def _build(self, rng):
        return self.in_shape

    def forward(self, x, train=False, rng=None):
        with np.errstate(over="ignore"):
            y = 1.0 / (1.0 + np.exp(-x))
        y = y.astype(x.dtype, copy=False)
        if train:
            self._y = y
        return y

    def backward(self, grad_out):
        return grad_out * self._y * (1.0 - self._y)


class Softmax(Layer):
    """Softmax over the last axis; outputs are a probability vector."""

    def _build(self, rng):
        return self.in_shape

    def forward(self, x, train=False, rng=None):
        z = x - x.max(axis=-1, keepdims=True)
        e = np.exp(z)
        y = e / e.sum(axis=-1, keepdims=True)
        if train:
            self._y = y
        return y

    def backward(self, grad_out):
        y = self._y
        return (grad_out - (grad_out * y).sum(axis=-1, keepdims=True)) * y


LAYER_KINDS: dict[str, type] = {
    "Conv2D": Conv2D,
    "TransposedConv2D": TransposedConv2D,
    "MaxPool2D": MaxPool2D,
    "Dense": Dense,
    "Flatten": Flatten,
    "Reshape": Reshape,
    "Dropout": Dropout,
    "ReLU": ReLU,
    "Sigmoid": Sigmoid,
    "Softmax": Softmax,
}


def build_layer(spec: LayerSpec, in_shape: tuple[int, ...], rng, dtype) -> Layer:
    return LAYER_KINDS[spec.kind](spec, in_shape, rng, dtype)
