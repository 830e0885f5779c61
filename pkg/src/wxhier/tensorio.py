"""WXT1 binary tensor container.

Layout: magic ``WXT1``, little-endian u32 rank, u32 dims[rank], then the
raw little-endian float32 payload in row-major order.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FormatError

MAGIC = b"WXT1"


def tensor_to_bytes(array: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(array, dtype="<f4")
    header = MAGIC + struct.pack("<I", arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + arr.tobytes()


def tensor_from_bytes(data: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Decode one tensor starting at ``offset``; returns (array, next_offset)."""
    if data[offset : offset + 4] != MAGIC:
        raise FormatError(f"bad tensor magic {data[offset:offset + 4]!r}")
    offset += 4
    if offset + 4 > len(data):
        raise FormatError("truncated tensor header")
    (rank,) = struct.unpack_from("<I", data, offset)
    offset += 4
    if rank > 8:
        raise FormatError(f"implausible tensor rank {rank}")
    if offset + 4 * rank > len(data):
        raise FormatError("truncated tensor dims")
    dims = struct.unpack_from(f"<{rank}I", data, offset)
    offset += 4 * rank
    count = 1
    for d in dims:
        count *= d
    end = offset + 4 * count
    if end > len(data):
        raise FormatError(f"truncated tensor payload: need {4 * count} bytes")
    arr = np.frombuffer(data[offset:end], dtype="<f4").reshape(dims)
    return arr.copy(), end


def write_tensor(path, array: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(tensor_to_bytes(array))


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    arr, end = tensor_from_bytes(data)
    if end != len(data):
        raise FormatError(f"{path}: {len(data) - end} trailing bytes after tensor")
    return arr
