"""Parameter serialization: a shape table followed by flat little-endian float64 arrays.

Layout::

    u32 n_arrays
    n_arrays x (u16 name_len, name utf-8, u8 ndim, ndim x u32 dims)
    concatenated array data, '<f8', row-major, in table order
"""

from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np


def write_arrays(fh: BinaryIO, arrays: dict[str, np.ndarray]) -> None:
    fh.write(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        raw = name.encode("utf-8")
        fh.write(struct.pack("<H", len(raw)) + raw)
        fh.write(struct.pack("<B", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    for arr in arrays.values():
        fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_exact(fh: BinaryIO, n: int) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise ValueError("truncated parameter block")
    return buf


def read_arrays(fh: BinaryIO) -> dict[str, np.ndarray]:
    (count,) = struct.unpack("<I", _read_exact(fh, 4))
    table = []
    for _ in range(count):
        (name_len,) = struct.unpack("<H", _read_exact(fh, 2))
        name = _read_exact(fh, name_len).decode("utf-8")
        (ndim,) = struct.unpack("<B", _read_exact(fh, 1))
        dims = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim))
        table.append((name, dims))
    out = {}
    for name, dims in table:
        n = int(np.prod(dims, dtype=np.int64))
        data = np.frombuffer(_read_exact(fh, 8 * n), dtype="<f8")
        out[name] = data.astype(np.float64).reshape(dims)
    return out
