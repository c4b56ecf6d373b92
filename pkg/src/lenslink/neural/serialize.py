"""Flat binary persistence for trained block parameters.

Layout (all little-endian): magic b"PBML", format version u32, block id
u32, tensor count u32, then per tensor sorted by name: name length u16,
name bytes (utf-8), ndim u32, each dim u32, data as float64.
"""

from __future__ import annotations

import struct

import numpy as np

from .training import NetworkParams

MAGIC = b"PBML"
VERSION = 1


def save_params(path, params: NetworkParams) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, params.block_id,
                             len(params.tensors)))
        for name in sorted(params.tensors):
            arr = np.ascontiguousarray(params.tensors[name], dtype="<f8")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def _read(fh, fmt):
    size = struct.calcsize(fmt)
    buf = fh.read(size)
    if len(buf) != size:
        raise ValueError("truncated parameter file")
    return struct.unpack(fmt, buf)


def load_params(path) -> NetworkParams:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError("not a lens-model parameter file")
        version, block_id, count = _read(fh, "<III")
        if version != VERSION:
            raise ValueError(f"unsupported format version {version}")
        tensors = {}
        for _ in range(count):
            (name_len,) = _read(fh, "<H")
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = _read(fh, "<I")
            shape = _read(fh, f"<{ndim}I") if ndim else ()
            n_items = int(np.prod(shape, dtype=int)) if ndim else 1
            buf = fh.read(8 * n_items)
            if len(buf) != 8 * n_items:
                raise ValueError("truncated parameter file")
            tensors[name] = np.frombuffer(buf, dtype="<f8").reshape(shape)
    return NetworkParams(block_id=block_id, tensors=tensors)
