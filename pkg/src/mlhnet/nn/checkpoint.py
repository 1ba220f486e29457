"""MLHW checkpoint format (all integers little-endian).

    b"MLHW" | u32 version=1 | u32 meta_len | meta (UTF-8 JSON)
    u32 tensor_count
    per tensor: u32 name_len | name | u8 dtype (0=f32, 1=f64) | u32 ndim
                | u32 dims[ndim] | raw little-endian data
"""
from __future__ import annotations

import io
import json
import struct

import numpy as np

from ..errors import BadMagic, LengthMismatch, ShapeMismatch, VersionUnsupported

MAGIC = b"MLHW"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


def write_state(fh, meta: dict, tensors) -> None:
    fh.write(MAGIC)
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    fh.write(struct.pack("<II", VERSION, len(blob)))
    fh.write(blob)
    tensors = list(tensors)
    fh.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors:
        arr = np.asarray(arr)
        code = _CODES.get(arr.dtype)
        if code is None:
            raise ShapeMismatch(f"{name}: unsupported dtype {arr.dtype}")
        nb = name.encode("utf-8")
        fh.write(struct.pack("<I", len(nb)) + nb)
        fh.write(struct.pack("<BI", code, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())


def _read(fh, n):
    b = fh.read(n)
    if len(b) != n:
        raise LengthMismatch("checkpoint is truncated")
    return b


def read_state(fh):
    """Returns ``(meta, [(name, array), ...])``."""
    if _read(fh, 4) != MAGIC:
        raise BadMagic("not an MLHW checkpoint")
    version, mlen = struct.unpack("<II", _read(fh, 8))
    if version != VERSION:
        raise VersionUnsupported(f"MLHW version {version} is not supported")
    meta = json.loads(_read(fh, mlen).decode("utf-8"))
    (count,) = struct.unpack("<I", _read(fh, 4))
    tensors = []
    for _ in range(count):
        (nlen,) = struct.unpack("<I", _read(fh, 4))
        name = _read(fh, nlen).decode("utf-8")
        code, ndim = struct.unpack("<BI", _read(fh, 5))
        if code not in _DTYPES:
            raise ShapeMismatch(f"{name}: unknown dtype code {code}")
        shape = struct.unpack(f"<{ndim}I", _read(fh, 4 * ndim))
        dt = _DTYPES[code]
        size = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(_read(fh, size * dt.itemsize), dtype=dt).reshape(shape)
        tensors.append((name, data.astype(dt.newbyteorder("="))))
    return meta, tensors


def save_model(model, path_or_fh, meta: dict) -> None:
    if hasattr(path_or_fh, "write"):
        write_state(path_or_fh, meta, model.state_arrays())
        return
    with open(path_or_fh, "wb") as fh:
        write_state(fh, meta, model.state_arrays())


def load_into(model, tensors) -> None:
    """Copy ``tensors`` into ``model``'s parameters and buffers by name."""
    targets = dict(model.state_arrays())
    names = [n for n, _ in tensors]
    if sorted(names) != sorted(targets):
        raise ShapeMismatch("checkpoint tensors do not match the model")
    for name, arr in tensors:
        dst = targets[name]
        if dst.shape != arr.shape:
            raise ShapeMismatch(f"{name}: checkpoint shape {arr.shape} != model {dst.shape}")
        dst[...] = arr


def read_state_bytes(data: bytes):
    return read_state(io.BytesIO(data))
