"""Model descriptions: a strict chain of layer specs plus parameter arrays.

A ``ModelSpec`` is data, not behavior; ``shape_infer`` statically checks
the chain, ``init_params`` allocates parameter arrays for it, and
``forward_pass`` / ``backward_from_logits`` execute it.  Parameters are a
list aligned with the layers; each element is a dict of named arrays
(empty for parameterless layers).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeError
from . import layers as L

Shape = tuple[int, ...]


@dataclass(frozen=True)
class Conv:
    filters: int
    kernel: int
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.filters < 1 or self.kernel < 1 or self.stride < 1 or self.padding < 0:
            raise ShapeError(f"bad conv spec {self}")


@dataclass(frozen=True)
class BatchNorm:
    epsilon: float = 1e-5
    momentum: float = 0.1


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class AvgPool:
    window: int
    stride: int

    def __post_init__(self):
        if self.window < 1 or self.stride < 1:
            raise ShapeError(f"bad pool spec {self}")


@dataclass(frozen=True)
class Dropout:
    rate: float

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ConfigError(f"dropout rate must lie in [0, 1), got {self.rate}")


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class Dense:
    units: int

    def __post_init__(self):
        if self.units < 1:
            raise ShapeError(f"dense units must be >= 1, got {self.units}")


@dataclass(frozen=True)
class Softmax:
    pass


LayerSpec = Conv | BatchNorm | ReLU | AvgPool | Dropout | Flatten | Dense | Softmax

# Parameter array names per layer type, in serialization order.
PARAM_KEYS: dict[type, tuple[str, ...]] = {
    Conv: ("w", "b"),
    BatchNorm: ("gamma", "beta", "running_mean", "running_var"),
    Dense: ("w", "b"),
}
TRAINABLE_KEYS: dict[type, tuple[str, ...]] = {
    Conv: ("w", "b"),
    BatchNorm: ("gamma", "beta"),
    Dense: ("w", "b"),
}


@dataclass(frozen=True)
class ModelSpec:
    input_shape: Shape  # (H, W, C)
    layers: tuple[LayerSpec, ...]
    n_out: int

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        if len(self.input_shape) != 3:
            raise ShapeError(f"input shape must be (H, W, C), got {self.input_shape}")
        if len(self.layers) < 2 or not (
            isinstance(self.layers[-2], Dense)
            and self.layers[-2].units == self.n_out
            and isinstance(self.layers[-1], Softmax)
        ):
            raise ShapeError("model must end with Dense(n_out) then Softmax")


def shape_infer(spec: ModelSpec) -> list[Shape]:
    """Output shape of every layer (sample shapes, without the batch dim)."""
    shape: Shape = spec.input_shape
    shapes: list[Shape] = []
    for layer in spec.layers:
        if isinstance(layer, Conv):
            if len(shape) != 3:
                raise ShapeError(f"conv needs a (H, W, C) input, got {shape}")
            oh, ow = L.conv_output_hw(shape[0], shape[1], layer.kernel, layer.stride, layer.padding)
            shape = (oh, ow, layer.filters)
        elif isinstance(layer, BatchNorm):
            if len(shape) != 3:
                raise ShapeError(f"batchnorm needs a (H, W, C) input, got {shape}")
        elif isinstance(layer, (ReLU, Dropout)):
            pass
        elif isinstance(layer, AvgPool):
            if len(shape) != 3:
                raise ShapeError(f"avgpool needs a (H, W, C) input, got {shape}")
            if shape[0] < layer.window or shape[1] < layer.window:
                raise ShapeError(f"pool window {layer.window} does not fit {shape}")
            oh = (shape[0] - layer.window) // layer.stride + 1
            ow = (shape[1] - layer.window) // layer.stride + 1
            shape = (oh, ow, shape[2])
        elif isinstance(layer, Flatten):
            if len(shape) != 3:
                raise ShapeError(f"flatten needs a (H, W, C) input, got {shape}")
            shape = (shape[0] * shape[1] * shape[2],)
        elif isinstance(layer, Dense):
            if len(shape) != 1:
                raise ShapeError(f"dense needs a flat input, got {shape}")
            shape = (layer.units,)
        elif isinstance(layer, Softmax):
            if len(shape) != 1:
                raise ShapeError(f"softmax needs a flat input, got {shape}")
        else:
            raise ShapeError(f"unknown layer {layer!r}")
        shapes.append(shape)
    return shapes


Params = list[dict[str, np.ndarray]]


def init_params(spec: ModelSpec, rng: np.random.Generator, dtype=np.float32) -> Params:
    """He-initialized parameters; draw order follows the layer order."""
    shapes = shape_infer(spec)
    params: Params = []
    shape = spec.input_shape
    for layer, out_shape in zip(spec.layers, shapes):
        entry: dict[str, np.ndarray] = {}
        if isinstance(layer, Conv):
            fan_in = layer.kernel * layer.kernel * shape[2]
            std = np.sqrt(2.0 / fan_in)
            entry["w"] = (
                rng.standard_normal((layer.kernel, layer.kernel, shape[2], layer.filters)) * std
            ).astype(dtype)
            entry["b"] = np.zeros(layer.filters, dtype=dtype)
        elif isinstance(layer, BatchNorm):
            c = shape[2]
            entry["gamma"] = np.ones(c, dtype=dtype)
            entry["beta"] = np.zeros(c, dtype=dtype)
            entry["running_mean"] = np.zeros(c, dtype=dtype)
            entry["running_var"] = np.ones(c, dtype=dtype)
        elif isinstance(layer, Dense):
            fan_in = shape[0]
            std = np.sqrt(2.0 / fan_in)
            entry["w"] = (rng.standard_normal((fan_in, layer.units)) * std).astype(dtype)
            entry["b"] = np.zeros(layer.units, dtype=dtype)
        params.append(entry)
        shape = out_shape
    return params


def clone_params(params: Params, dtype=None) -> Params:
    return [
        {k: (v.astype(dtype) if dtype is not None else v.copy()) for k, v in entry.items()}
        for entry in params
    ]


def forward_pass(
    spec: ModelSpec,
    params: Params,
    x: np.ndarray,
    mode: str = "infer",
    rng: np.random.Generator | None = None,
    update_running: bool = True,
) -> tuple[np.ndarray, list]:
    """Run the chain; returns (probabilities, per-layer caches)."""
    if x.ndim != 4 or tuple(x.shape[1:]) != spec.input_shape:
        raise ShapeError(f"input must be (N, {spec.input_shape}), got {x.shape}")
    caches: list = []
    out = x
    for layer, entry in zip(spec.layers, params):
        if isinstance(layer, Conv):
            caches.append(("conv", out))
            out = L.conv2d_forward(out, entry["w"], entry["b"], layer.stride, layer.padding)
        elif isinstance(layer, BatchNorm):
            out, cache = L.batchnorm_forward(
                out,
                entry["gamma"],
                entry["beta"],
                entry["running_mean"],
                entry["running_var"],
                layer.epsilon,
                layer.momentum,
                mode,
                update_running,
            )
            caches.append(("batchnorm", cache))
        elif isinstance(layer, ReLU):
            out, cache = L.relu_forward(out)
            caches.append(("relu", cache))
        elif isinstance(layer, AvgPool):
            caches.append(("avgpool", out.shape))
            out = L.avgpool_forward(out, layer.window, layer.stride)
        elif isinstance(layer, Dropout):
            out, keep = L.dropout_forward(out, layer.rate, mode, rng)
            caches.append(("dropout", keep))
        elif isinstance(layer, Flatten):
            out, cache = L.flatten_forward(out)
            caches.append(("flatten", cache))
        elif isinstance(layer, Dense):
            caches.append(("dense", out))
            out = L.dense_forward(out, entry["w"], entry["b"])
        elif isinstance(layer, Softmax):
            out = L.softmax_forward(out)
            caches.append(("softmax", out))
    return out, caches


def zero_grads(spec: ModelSpec, params: Params) -> Params:
    grads: Params = []
    for layer, entry in zip(spec.layers, params):
        keys = TRAINABLE_KEYS.get(type(layer), ())
        grads.append({k: np.zeros_like(entry[k]) for k in keys})
    return grads


def backward_from_logits(
    spec: ModelSpec, params: Params, caches: list, grad_logits: np.ndarray
) -> tuple[np.ndarray, Params]:
    """Backpropagate from the gradient w.r.t. the final Dense output.

    The closing Softmax is skipped: its gradient is fused into the
    cross-entropy term that produces ``grad_logits``.
    """
    grads = zero_grads(spec, params)
    grad = grad_logits
    for i in range(len(spec.layers) - 2, -1, -1):
        layer = spec.layers[i]
        kind, cache = caches[i]
        entry = params[i]
        if isinstance(layer, Conv):
            grad, gw, gb = L.conv2d_backward(cache, entry["w"], grad, layer.stride, layer.padding)
            grads[i]["w"] = gw
            grads[i]["b"] = gb
        elif isinstance(layer, BatchNorm):
            grad, ggamma, gbeta = L.batchnorm_backward(grad, cache)
            grads[i]["gamma"] = ggamma
            grads[i]["beta"] = gbeta
        elif isinstance(layer, ReLU):
            grad = L.relu_backward(grad, cache)
        elif isinstance(layer, AvgPool):
            grad = L.avgpool_backward(grad, cache, layer.window, layer.stride)
        elif isinstance(layer, Dropout):
            grad = L.dropout_backward(grad, cache, layer.rate)
        elif isinstance(layer, Flatten):
            grad = L.flatten_backward(grad, cache)
        elif isinstance(layer, Dense):
            grad, gw, gb = L.dense_backward(cache, entry["w"], grad)
            grads[i]["w"] = gw
            grads[i]["b"] = gb
        elif isinstance(layer, Softmax):
            grad = L.softmax_backward(cache, grad)
    return grad, grads


def predict(spec: ModelSpec, params: Params, x: np.ndarray) -> np.ndarray:
    """Inference-mode probabilities, one row per batch item, rows sum to 1.

    Argmax consumers break ties toward the lowest class index.
    """
    probs, _ = forward_pass(spec, params, x, mode="infer")
    return probs
