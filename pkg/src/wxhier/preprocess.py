"""Image preprocessing: Lanczos resize, train-set standardization, one-hot.

The resampler is separable (horizontal pass then vertical pass) with
pixel-center alignment, clamp-to-edge sampling and per-output-pixel weight
renormalization, so constant images stay exactly constant and a same-size
resize is the identity.  Standardization subtracts the training-set mean
and divides by its standard deviation; the two scalars are persisted so
inference uses the exact training statistics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateError, DimensionError, FormatError
from .imageio import ImageU8, bgr_to_rgb, to_tensor

DEFAULT_WINDOW = 3
MODEL_INPUT_HW = (100, 100)


def lanczos_kernel(x, a: int = DEFAULT_WINDOW):
    """Windowed-sinc kernel: sinc(x) * sinc(x/a) for |x| < a, else 0.

    Even in x, 1 at the origin, 0 at every other integer.  Accepts scalars
    or arrays.
    """
    if a < 1:
        raise DimensionError(f"window size must be >= 1, got {a}")
    x = np.asarray(x, dtype=np.float64)
    out = np.where(np.abs(x) < a, np.sinc(x) * np.sinc(x / a), 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def _resample_matrix(n_src: int, n_dst: int, a: int) -> np.ndarray:
    """(n_dst, n_src) weight matrix for one separable pass.

    Rows hold the renormalized kernel taps for one output pixel; taps that
    fall outside the source are clamped to the nearest edge pixel, which
    accumulates their weight onto that edge.
    """
    scale = n_src / n_dst
    weights = np.zeros((n_dst, n_src), dtype=np.float64)
    for dst in range(n_dst):
        src = (dst + 0.5) * scale - 0.5
        lo = math.floor(src) - a + 1
        taps = np.arange(lo, lo + 2 * a)
        w = lanczos_kernel(src - taps, a)
        total = w.sum()
        idx = np.clip(taps, 0, n_src - 1)
        np.add.at(weights[dst], idx, w / total)
    return weights


def resize_lanczos(img: np.ndarray, out_h: int, out_w: int, a: int = DEFAULT_WINDOW) -> np.ndarray:
    """Resize an (H, W, C) float tensor to (out_h, out_w, C).

    Operates on raw-sample-scale values: the output is clamped to [0, 255].
    """
    if out_h < 1 or out_w < 1:
        raise DimensionError(f"target size must be positive, got {out_h}x{out_w}")
    img = np.asarray(img)
    if img.ndim != 3:
        raise DimensionError(f"expected (H, W, C) tensor, got shape {img.shape}")
    h, w = img.shape[0], img.shape[1]
    data = img.astype(np.float64)
    if w != out_w:
        data = np.einsum("ow,hwc->hoc", _resample_matrix(w, out_w, a), data)
    if h != out_h:
        data = np.einsum("oh,hwc->owc", _resample_matrix(h, out_h, a), data)
    return np.clip(data, 0.0, 255.0).astype(np.float32)


@dataclass(frozen=True)
class NormalizationStats:
    """Global scalar mean/std of the training samples, plus how many went in."""

    mean: float
    std: float
    sample_count: int

    def __post_init__(self):
        if not self.std > 0:
            raise DegenerateError(f"std must be positive, got {self.std}")
        if self.sample_count < 2:
            raise DegenerateError(f"need at least 2 samples, got {self.sample_count}")


def compute_stats(train_images: Iterable[np.ndarray]) -> NormalizationStats:
    """Mean and population standard deviation over every scalar sample.

    Uses a streaming per-image merge (Chan's update) in the given image
    order, so the result is deterministic and does not require holding the
    whole training set at once.
    """
    count = 0
    mean = 0.0
    m2 = 0.0  # sum of squared deviations from the running mean
    for img in train_images:
        arr = np.asarray(img, dtype=np.float64)
        n = arr.size
        if n == 0:
            continue
        b_mean = float(arr.mean())
        b_m2 = float(((arr - b_mean) ** 2).sum())
        delta = b_mean - mean
        total = count + n
        mean += delta * n / total
        m2 += b_m2 + delta * delta * count * n / total
        count = total
    if count < 2:
        raise DegenerateError(f"need at least 2 scalar samples, got {count}")
    var = m2 / count
    std = math.sqrt(var)
    if std == 0.0:
        raise DegenerateError("training samples have zero variance")
    return NormalizationStats(mean=mean, std=std, sample_count=count)


def normalize(x: np.ndarray, s: NormalizationStats) -> np.ndarray:
    """Elementwise (x - mean) / std, shape preserved, float32 output."""
    return ((np.asarray(x, dtype=np.float32) - np.float32(s.mean)) / np.float32(s.std)).astype(
        np.float32
    )


def one_hot(index: int, n: int) -> np.ndarray:
    """Length-n float vector with 1.0 at ``index`` and 0.0 elsewhere."""
    if not 0 <= index < n:
        raise IndexError(f"class index {index} out of range for {n} classes")
    vec = np.zeros(n, dtype=np.float32)
    vec[index] = 1.0
    return vec


def preprocess_pipeline(
    img: ImageU8,
    channel_order: str,
    s: NormalizationStats,
    out_hw: tuple[int, int] = MODEL_INPUT_HW,
) -> np.ndarray:
    """Full inference-side pipeline: (BGR swap) -> float -> resize -> standardize."""
    if channel_order == "BGR":
        img = bgr_to_rgb(img)
    elif channel_order != "RGB":
        raise DimensionError(f"unknown channel order {channel_order!r}")
    tensor = to_tensor(img)
    tensor = resize_lanczos(tensor, out_hw[0], out_hw[1])
    return normalize(tensor, s)


def stats_to_json(s: NormalizationStats) -> str:
    # repr-style floats round-trip exactly (always >= 9 significant digits
    # of precision preserved).
    return json.dumps(
        {"mean": s.mean, "std": s.std, "sample_count": s.sample_count},
        indent=2,
    )


def stats_from_json(text: str | bytes) -> NormalizationStats:
    try:
        doc = json.loads(text)
        return NormalizationStats(
            mean=float(doc["mean"]), std=float(doc["std"]), sample_count=int(doc["sample_count"])
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad stats document: {exc}") from None


def save_stats(path, s: NormalizationStats) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(stats_to_json(s) + "\n")


def load_stats(path) -> NormalizationStats:
    with open(path, "r", encoding="utf-8") as fh:
        return stats_from_json(fh.read())
