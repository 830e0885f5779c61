"""Forward and backward kernels for every layer type, NHWC layout.

All kernels preserve the input dtype, so the same code runs in float32
(the training default) and in float64 (used by gradient verification).
``conv2d_forward`` gathers patches into a matrix product; the plain
nested-loop implementation stays available as ``conv2d_forward_naive``
and is the reference the fast path is tested against.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ConfigError, ShapeError


def conv_output_hw(h: int, w: int, k: int, stride: int, pad: int) -> tuple[int, int]:
    oh = (h + 2 * pad - k) // stride + 1
    ow = (w + 2 * pad - k) // stride + 1
    if h + 2 * pad < k or w + 2 * pad < k or oh < 1 or ow < 1:
        raise ShapeError(f"kernel {k} with pad {pad} does not fit input {h}x{w}")
    return oh, ow


def _check_conv_args(x: np.ndarray, kernels: np.ndarray, stride: int, pad: int) -> None:
    if x.ndim != 4:
        raise ShapeError(f"conv input must be (N, H, W, C), got {x.shape}")
    if kernels.ndim != 4 or kernels.shape[0] != kernels.shape[1]:
        raise ShapeError(f"kernels must be (k, k, C_in, filters), got {kernels.shape}")
    if x.shape[3] != kernels.shape[2]:
        raise ShapeError(f"channel mismatch: input {x.shape[3]}, kernels {kernels.shape[2]}")
    if stride < 1 or pad < 0:
        raise ShapeError(f"bad stride/pad {stride}/{pad}")


def _im2col(x: np.ndarray, k: int, stride: int, pad: int) -> np.ndarray:
    """Gather conv patches: (N, H', W', k, k, C)."""
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    windows = sliding_window_view(xp, (k, k), axis=(1, 2))  # (N, H*, W*, C, k, k)
    windows = windows[:, ::stride, ::stride]
    return np.ascontiguousarray(windows.transpose(0, 1, 2, 4, 5, 3))


def conv2d_forward(
    x: np.ndarray, kernels: np.ndarray, bias: np.ndarray, stride: int = 1, pad: int = 0
) -> np.ndarray:
    """Cross-correlation with zero padding; x (N,H,W,C), kernels (k,k,C,F)."""
    _check_conv_args(x, kernels, stride, pad)
    n, h, w, c = x.shape
    k, f = kernels.shape[0], kernels.shape[3]
    oh, ow = conv_output_hw(h, w, k, stride, pad)
    cols = _im2col(x, k, stride, pad).reshape(n * oh * ow, k * k * c)
    out = cols @ kernels.reshape(k * k * c, f) + bias
    return out.reshape(n, oh, ow, f)


def conv2d_forward_naive(
    x: np.ndarray, kernels: np.ndarray, bias: np.ndarray, stride: int = 1, pad: int = 0
) -> np.ndarray:
    """Reference nested-loop convolution; slow, for verification only."""
    _check_conv_args(x, kernels, stride, pad)
    n, h, w, c = x.shape
    k, f = kernels.shape[0], kernels.shape[3]
    oh, ow = conv_output_hw(h, w, k, stride, pad)
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    out = np.zeros((n, oh, ow, f), dtype=x.dtype)
    for ni in range(n):
        for oy in range(oh):
            for ox in range(ow):
                for fi in range(f):
                    acc = 0.0
                    for ky in range(k):
                        for kx in range(k):
                            for ci in range(c):
                                acc += (
                                    xp[ni, oy * stride + ky, ox * stride + kx, ci]
                                    * kernels[ky, kx, ci, fi]
                                )
                    out[ni, oy, ox, fi] = acc + bias[fi]
    return out


def conv2d_backward(
    x: np.ndarray,
    kernels: np.ndarray,
    grad_out: np.ndarray,
    stride: int = 1,
    pad: int = 0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients w.r.t. input, kernels and bias."""
    _check_conv_args(x, kernels, stride, pad)
    n, h, w, c = x.shape
    k, f = kernels.shape[0], kernels.shape[3]
    oh, ow = conv_output_hw(h, w, k, stride, pad)
    if grad_out.shape != (n, oh, ow, f):
        raise ShapeError(f"grad_out shape {grad_out.shape} != {(n, oh, ow, f)}")

    g = grad_out.reshape(n * oh * ow, f)
    grad_bias = g.sum(axis=0)

    cols = _im2col(x, k, stride, pad).reshape(n * oh * ow, k * k * c)
    grad_kernels = (cols.T @ g).reshape(k, k, c, f)

    dcols = (g @ kernels.reshape(k * k * c, f).T).reshape(n, oh, ow, k, k, c)
    dxp = np.zeros((n, h + 2 * pad, w + 2 * pad, c), dtype=x.dtype)
    for ky in range(k):
        for kx in range(k):
            dxp[:, ky : ky + stride * oh : stride, kx : kx + stride * ow : stride, :] += dcols[
                :, :, :, ky, kx, :
            ]
    grad_x = dxp[:, pad : pad + h, pad : pad + w, :] if pad else dxp
    return grad_x, grad_kernels, grad_bias


def batchnorm_forward(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    eps: float,
    momentum: float,
    mode: str,
    update_running: bool = True,
) -> tuple[np.ndarray, dict]:
    """Per-channel normalization over the N*H*W samples of each channel.

    Train mode normalizes with batch statistics and (optionally) blends
    them into the running statistics in place:
    ``running = (1 - momentum) * running + momentum * batch``.
    Infer mode normalizes with the running statistics.
    """
    if x.ndim != 4 or x.shape[3] != gamma.shape[0]:
        raise ShapeError(f"batchnorm expects (N, H, W, C={gamma.shape[0]}), got {x.shape}")
    if mode == "train":
        mu = x.mean(axis=(0, 1, 2))
        var = x.var(axis=(0, 1, 2))
        if update_running:
            running_mean *= 1.0 - momentum
            running_mean += momentum * mu
            running_var *= 1.0 - momentum
            running_var += momentum * var
    elif mode == "infer":
        mu = running_mean.astype(x.dtype)
        var = running_var.astype(x.dtype)
    else:
        raise ConfigError(f"unknown batchnorm mode {mode!r}")
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x - mu) * inv_std
    out = gamma * x_hat + beta
    cache = {"x_hat": x_hat, "gamma": gamma, "inv_std": inv_std, "mode": mode}
    return out, cache


def batchnorm_backward(grad_out: np.ndarray, cache: dict) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x_hat = cache["x_hat"]
    gamma = cache["gamma"]
    inv_std = cache["inv_std"]
    grad_beta = grad_out.sum(axis=(0, 1, 2))
    grad_gamma = (grad_out * x_hat).sum(axis=(0, 1, 2))
    if cache["mode"] == "train":
        m = x_hat.shape[0] * x_hat.shape[1] * x_hat.shape[2]
        grad_x = (gamma * inv_std) * (
            grad_out
            - grad_beta / m
            - x_hat * (grad_gamma / m)
        )
    else:
        grad_x = grad_out * gamma * inv_std
    return grad_x, grad_gamma, grad_beta


def relu_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.maximum(x, 0), x


def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    return grad_out * (x > 0)


def avgpool_forward(x: np.ndarray, window: int, stride: int) -> np.ndarray:
    if x.ndim != 4:
        raise ShapeError(f"avgpool input must be (N, H, W, C), got {x.shape}")
    if window < 1 or stride < 1:
        raise ShapeError(f"bad pool window/stride {window}/{stride}")
    n, h, w, c = x.shape
    oh = (h - window) // stride + 1
    ow = (w - window) // stride + 1
    if h < window or w < window or oh < 1 or ow < 1:
        raise ShapeError(f"pool window {window} does not fit input {h}x{w}")
    out = np.zeros((n, oh, ow, c), dtype=x.dtype)
    for dy in range(window):
        for dx in range(window):
            out += x[:, dy : dy + stride * oh : stride, dx : dx + stride * ow : stride, :]
    return out / (window * window)


def avgpool_backward(
    grad_out: np.ndarray, x_shape: tuple, window: int, stride: int
) -> np.ndarray:
    n, h, w, c = x_shape
    oh, ow = grad_out.shape[1], grad_out.shape[2]
    grad_x = np.zeros(x_shape, dtype=grad_out.dtype)
    share = grad_out / (window * window)
    for dy in range(window):
        for dx in range(window):
            grad_x[:, dy : dy + stride * oh : stride, dx : dx + stride * ow : stride, :] += share
    return grad_x


def dropout_forward(
    x: np.ndarray, rate: float, mode: str, rng: np.random.Generator | None
) -> tuple[np.ndarray, np.ndarray | None]:
    """Inverted dropout: kept units are scaled by 1/(1-rate) in train mode."""
    if mode != "train" or rate == 0.0:
        return x, None
    if rng is None:
        raise ConfigError("train-mode dropout needs a random generator")
    keep = (rng.random(x.shape) >= rate).astype(x.dtype)
    return x * keep / (1.0 - rate), keep


def dropout_backward(grad_out: np.ndarray, keep: np.ndarray | None, rate: float) -> np.ndarray:
    if keep is None:
        return grad_out
    return grad_out * keep / (1.0 - rate)


def flatten_forward(x: np.ndarray) -> tuple[np.ndarray, tuple]:
    return x.reshape(x.shape[0], -1), x.shape


def flatten_backward(grad_out: np.ndarray, x_shape: tuple) -> np.ndarray:
    return grad_out.reshape(x_shape)


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    if x.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"dense expects (N, {w.shape[0]}), got {x.shape}")
    return x @ w + b


def dense_backward(
    x: np.ndarray, w: np.ndarray, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return grad_out @ w.T, x.T @ grad_out, grad_out.sum(axis=0)


def softmax_forward(x: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction for stability."""
    if x.ndim != 2:
        raise ShapeError(f"softmax input must be (N, classes), got {x.shape}")
    z = x - x.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_backward(probs: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    return probs * (grad_out - (grad_out * probs).sum(axis=1, keepdims=True))
