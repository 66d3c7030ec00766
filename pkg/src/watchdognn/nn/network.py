"""Sequential network: spec list, parameter storage, forward and backward."""

from __future__ import annotations

import copy as _copy

import numpy as np

from ..errors import NumericError, ShapeError
from .layers import DEFAULT_DTYPE, Layer, LayerSpec, build_layer
from .losses import Loss, resolve_loss


class Network:
    """An ordered stack of layers instantiated from specs.

    Construction resolves every layer's output shape, so any shape
    inconsistency is reported immediately with the offending layer index.
    Parameter initialization is driven by a single seeded generator and is
    bit-reproducible.

    ``mode`` is the default forward mode ("inference" or "train"). Inference
    forwards write no layer state and may run concurrently; train-mode calls
    (and backward) mutate per-layer caches and must stay single-threaded per
    instance.
    """

    def __init__(self, specs: list[LayerSpec], input_shape: tuple[int, ...],
                 seed: int = 0, dtype=DEFAULT_DTYPE, kind: str | None = None):
        self.specs = list(specs)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.dtype = np.dtype(dtype)
        self.seed = seed
        self.kind = kind
        self.mode = "inference"
        rng = np.random.default_rng(seed)
        self.layers: list[Layer] = []
        shape = self.input_shape
        for i, spec in enumerate(self.specs):
            try:
                layer = build_layer(spec, shape, rng, self.dtype)
            except ShapeError as e:
                raise ShapeError(f"layer {i} ({spec.kind}): {e}") from e
            self.layers.append(layer)
            shape = layer.out_shape
        self.output_shape = shape

    def __repr__(self):
        kinds = ", ".join(s.kind for s in self.specs)
        return f"Network({self.input_shape} -> {self.output_shape}, [{kinds}])"

    # -- forward / backward ------------------------------------------------

    def forward(self, x: np.ndarray, mode: str | None = None,
                rng: np.random.Generator | None = None) -> np.ndarray:
        """Run the stack on ``x`` ([N, *input_shape] or a single sample)."""
        mode = self.mode if mode is None else mode
        if mode not in ("train", "inference"):
            raise ValueError(f"mode must be 'train' or 'inference', got {mode!r}")
        x = np.asarray(x, dtype=self.dtype)
        unbatched = x.shape == self.input_shape
        if unbatched:
            x = x[None]
        if x.shape[1:] != self.input_shape:
            raise ShapeError(f"input shape {x.shape[1:]} does not match network "
                             f"input {self.input_shape}")
        train = mode == "train"
        for layer in self.layers:
            x = layer.forward(x, train=train, rng=rng)
        return x[0] if unbatched else x

    def backward(self, x: np.ndarray, target: np.ndarray, loss: Loss | str,
                 rng: np.random.Generator | None = None) -> tuple[float, list[dict[str, np.ndarray]]]:
        """Train-mode forward, loss, and full backward sweep.

        Returns the scalar loss and one gradient dict per layer (empty for
        parameterless layers), each entry shaped like its parameter.
        """
        loss = resolve_loss(loss)
        pred = self.forward(x, mode="train", rng=rng)
        value = loss.value(pred, target)
        if not np.isfinite(value):
            raise NumericError(f"non-finite loss {value!r}")
        grad = loss.grad(pred, target)
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return value, [dict(layer.grads) for layer in self.layers]

    # -- parameter access --------------------------------------------------

    def param_items(self):
        """Yield (layer_index, name, array) for every parameter tensor."""
        for i, layer in enumerate(self.layers):
            for name in sorted(layer.params):
                yield i, name, layer.params[name]

    def num_params(self) -> int:
        return sum(p.size for _, _, p in self.param_items())

    def get_flat_params(self) -> np.ndarray:
        return np.concatenate([p.ravel() for _, _, p in self.param_items()]) \
            if self.num_params() else np.empty(0, dtype=self.dtype)

    def copy(self, dtype=None) -> "Network":
        """Deep copy, optionally cast to another dtype (exact params kept)."""
        net = Network(self.specs, self.input_shape, seed=self.seed,
                      dtype=dtype or self.dtype, kind=self.kind)
        net.mode = self.mode
        for src, dst in zip(self.layers, net.layers):
            for name, value in src.params.items():
                dst.params[name] = value.astype(net.dtype)
        return net

    def __deepcopy__(self, memo):
        net = self.copy()
        memo[id(self)] = net
        return net
