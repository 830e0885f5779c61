"""Model file format, magic ``WXM1``.

Layout:

    bytes 0..3   magic b"WXM1"
    u32 LE       format version (currently 1)
    u32 LE       header length in bytes
    header       UTF-8 JSON: input_shape, n_out, layer list, optional
                 normalization stats, optional output label names
    blobs        one tensor container per parameter array, in layer
                 order and, within a layer, in the declared key order
                 (conv: w, b; batchnorm: gamma, beta, running_mean,
                 running_var; dense: w, b)

Tensor payloads are float32, matching the training dtype.
"""

from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np

from ..errors import FormatError, VersionError
from ..preprocess import NormalizationStats
from ..tensorio import tensor_from_bytes, tensor_to_bytes
from . import model as M

MAGIC = b"WXM1"
VERSION = 1

_LAYER_KINDS: dict[str, type] = {
    "conv": M.Conv,
    "batchnorm": M.BatchNorm,
    "relu": M.ReLU,
    "avgpool": M.AvgPool,
    "dropout": M.Dropout,
    "flatten": M.Flatten,
    "dense": M.Dense,
    "softmax": M.Softmax,
}
_KIND_NAMES = {cls: name for name, cls in _LAYER_KINDS.items()}


def layer_to_dict(layer: M.LayerSpec) -> dict:
    d = {"kind": _KIND_NAMES[type(layer)]}
    d.update(vars(layer))
    return d


def layer_from_dict(d: dict) -> M.LayerSpec:
    d = dict(d)
    kind = d.pop("kind", None)
    cls = _LAYER_KINDS.get(kind)
    if cls is None:
        raise FormatError(f"unknown layer kind {kind!r}")
    try:
        return cls(**d)
    except TypeError as exc:
        raise FormatError(f"bad fields for layer {kind!r}: {exc}") from None


def spec_to_dict(spec: M.ModelSpec) -> dict:
    return {
        "input_shape": list(spec.input_shape),
        "n_out": spec.n_out,
        "layers": [layer_to_dict(layer) for layer in spec.layers],
    }


def spec_from_dict(d: dict) -> M.ModelSpec:
    try:
        return M.ModelSpec(
            tuple(d["input_shape"]),
            tuple(layer_from_dict(ld) for ld in d["layers"]),
            d["n_out"],
        )
    except KeyError as exc:
        raise FormatError(f"model header missing field {exc}") from None


def model_to_bytes(
    spec: M.ModelSpec,
    params: M.Params,
    stats: NormalizationStats | None = None,
    labels: list[str] | None = None,
) -> bytes:
    header = spec_to_dict(spec)
    header["stats"] = (
        None
        if stats is None
        else {"mean": stats.mean, "std": stats.std, "sample_count": stats.sample_count}
    )
    header["labels"] = labels
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(np.uint32(VERSION).tobytes())
    buf.write(np.uint32(len(header_bytes)).tobytes())
    buf.write(header_bytes)
    for layer, entry in zip(spec.layers, params):
        for key in M.PARAM_KEYS.get(type(layer), ()):
            buf.write(tensor_to_bytes(entry[key].astype(np.float32)))
    return buf.getvalue()


def model_from_bytes(
    data: bytes,
) -> tuple[M.ModelSpec, M.Params, NormalizationStats | None, list[str] | None]:
    if len(data) < 12:
        raise FormatError("model file truncated before header")
    if data[:4] != MAGIC:
        raise FormatError(f"bad model magic {data[:4]!r}")
    version = int(np.frombuffer(data[4:8], dtype="<u4")[0])
    if version != VERSION:
        raise VersionError(f"unsupported model version {version}")
    header_len = int(np.frombuffer(data[8:12], dtype="<u4")[0])
    if len(data) < 12 + header_len:
        raise FormatError("model file truncated inside header")
    try:
        header = json.loads(data[12 : 12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"bad model header: {exc}") from None

    spec = spec_from_dict(header)
    offset = 12 + header_len
    params: M.Params = []
    for layer in spec.layers:
        entry: dict[str, np.ndarray] = {}
        for key in M.PARAM_KEYS.get(type(layer), ()):
            arr, offset = tensor_from_bytes(data, offset)
            entry[key] = arr
        params.append(entry)
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes after parameters")

    _check_param_shapes(spec, params)

    stats = None
    if header.get("stats") is not None:
        s = header["stats"]
        stats = NormalizationStats(s["mean"], s["std"], s["sample_count"])
    labels = header.get("labels")
    return spec, params, stats, labels


def _check_param_shapes(spec: M.ModelSpec, params: M.Params) -> None:
    shapes = M.shape_infer(spec)
    shape = spec.input_shape
    for layer, entry, out_shape in zip(spec.layers, params, shapes):
        if isinstance(layer, M.Conv):
            want = (layer.kernel, layer.kernel, shape[2], layer.filters)
            if entry["w"].shape != want or entry["b"].shape != (layer.filters,):
                raise FormatError(f"conv parameter shapes do not match the spec: {want}")
        elif isinstance(layer, M.BatchNorm):
            c = shape[2]
            if any(entry[k].shape != (c,) for k in M.PARAM_KEYS[M.BatchNorm]):
                raise FormatError(f"batchnorm parameter shapes do not match channel count {c}")
        elif isinstance(layer, M.Dense):
            want = (shape[0], layer.units)
            if entry["w"].shape != want or entry["b"].shape != (layer.units,):
                raise FormatError(f"dense parameter shapes do not match the spec: {want}")
        shape = out_shape


def save_model(
    path: str | Path,
    spec: M.ModelSpec,
    params: M.Params,
    stats: NormalizationStats | None = None,
    labels: list[str] | None = None,
) -> None:
    Path(path).write_bytes(model_to_bytes(spec, params, stats, labels))


def load_model(
    path: str | Path,
) -> tuple[M.ModelSpec, M.Params, NormalizationStats | None, list[str] | None]:
    return model_from_bytes(Path(path).read_bytes())
