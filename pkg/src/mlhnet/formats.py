"""Binary little-endian descriptor (MLHD1) and dataset (MLHS) files.

MLHD1::

    b"MLHD" | u32 version=1 | u32 N | u32 k | u8 view (0=X, 1=Y, 2=Z, 3=custom)
    [3 x f32 normal, custom views only] | N*N*k f32 payload (p, q, layer)

MLHS::

    b"MLHS" | u32 version=1 | u32 N | u32 k | u32 class_count
    class_count x (u32 len | UTF-8 name) | u32 record_count
    record_count x (u32 len | UTF-8 id | u32 label | u8 split (0=train, 1=test)
                    | MLHD1 X | MLHD1 Y | MLHD1 Z)
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import BadMagic, InvalidParams, LengthMismatch, VersionUnsupported
from .mlh import CANONICAL_VIEWS, INF, MLHDescriptor, MultiViewBundle, ViewDirection

DESC_MAGIC = b"MLHD"
DATASET_MAGIC = b"MLHS"
VERSION = 1
SPLITS = ("train", "test")


def _read(fh, n, what="file"):
    b = fh.read(n)
    if len(b) != n:
        raise LengthMismatch(f"{what} truncated: wanted {n} bytes, got {len(b)}")
    return b


def _stream(src):
    if isinstance(src, (bytes, bytearray, memoryview)):
        return io.BytesIO(bytes(src))
    return src


def descriptor_bytes(desc: MLHDescriptor) -> bytes:
    out = [DESC_MAGIC, struct.pack("<IIIB", VERSION, desc.N, desc.k, desc.view.tag)]
    if desc.view.tag == 3:
        out.append(desc.view.encoded_normal().tobytes())
    out.append(desc.grid.astype("<f4").tobytes())
    return b"".join(out)


def write_descriptor(desc: MLHDescriptor, dest) -> None:
    """Write to a path or a binary file object."""
    data = descriptor_bytes(desc)
    if hasattr(dest, "write"):
        dest.write(data)
    else:
        with open(dest, "wb") as fh:
            fh.write(data)


def read_descriptor(src) -> MLHDescriptor:
    """Read from bytes or a path (must hold exactly one descriptor), or from a
    binary file object (consumes exactly one record)."""
    if not hasattr(src, "read"):
        if not isinstance(src, (bytes, bytearray, memoryview)):
            with open(src, "rb") as f:
                src = f.read()
        fh = io.BytesIO(bytes(src))
        desc = read_descriptor(fh)
        if fh.read(1):
            raise LengthMismatch("trailing bytes after descriptor payload")
        return desc
    fh = src
    if _read(fh, 4, "descriptor") != DESC_MAGIC:
        raise BadMagic("not an MLHD descriptor")
    version, N, k, tag = struct.unpack("<IIIB", _read(fh, 13, "descriptor header"))
    if version != VERSION:
        raise VersionUnsupported(f"MLHD version {version} is not supported")
    if tag == 3:
        raw = np.frombuffer(_read(fh, 12, "descriptor header"), dtype="<f4")
        n = raw.astype(np.float64)
        if not np.all(np.isfinite(n)) or not np.linalg.norm(n) > 0:
            raise InvalidParams("custom view normal is not a usable direction")
        # f32 storage loses the 1e-9 unit-length tolerance; renormalise
        view = ViewDirection(normal=tuple(n / np.linalg.norm(n)),
                             stored=tuple(float(c) for c in raw))
    elif tag < 3:
        view = CANONICAL_VIEWS[tag]
    else:
        raise InvalidParams(f"unknown view tag {tag}")
    n = N * N * k
    grid = np.frombuffer(_read(fh, 4 * n, "descriptor payload"), dtype="<f4")
    if not np.all(np.isfinite(grid)):
        raise InvalidParams("descriptor payload holds non-finite values")
    return MLHDescriptor(N, k, view, grid.reshape(N, N, k).astype(np.float32))


@dataclass
class Record:
    shape_id: str
    label: int
    split: str
    bundle: MultiViewBundle


@dataclass
class Dataset:
    classes: list
    records: list = field(default_factory=list)

    @property
    def N(self):
        return self.records[0].bundle.N if self.records else 0

    @property
    def k(self):
        return self.records[0].bundle.k if self.records else 0

    def split(self, name):
        return [r for r in self.records if r.split == name]

    def arrays(self, split=None, dtype=np.float32):
        """``(X [n, 3, k, N, N], y [n])`` for one split, or all records."""
        recs = self.records if split is None else self.split(split)
        if not recs:
            return (np.zeros((0, 3, self.k, self.N, self.N), dtype=dtype),
                    np.zeros(0, dtype=np.int64))
        X = np.stack([r.bundle.as_array() for r in recs]).astype(dtype)
        return X, np.array([r.label for r in recs], dtype=np.int64)

    def validate(self):
        shapes = {(r.bundle.N, r.bundle.k) for r in self.records}
        if len(shapes) > 1:
            raise InvalidParams(f"records disagree on (N, k): {sorted(shapes)}")
        for r in self.records:
            if not 0 <= r.label < len(self.classes):
                raise InvalidParams(f"record {r.shape_id}: label {r.label} out of range")
            if r.split not in SPLITS:
                raise InvalidParams(f"record {r.shape_id}: unknown split {r.split!r}")


def _str(s):
    b = s.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def _read_str(fh):
    (n,) = struct.unpack("<I", _read(fh, 4, "dataset"))
    return _read(fh, n, "dataset").decode("utf-8")


def dataset_bytes(ds: Dataset) -> bytes:
    ds.validate()
    out = [DATASET_MAGIC, struct.pack("<IIII", VERSION, ds.N, ds.k, len(ds.classes))]
    out += [_str(c) for c in ds.classes]
    out.append(struct.pack("<I", len(ds.records)))
    for r in ds.records:
        out.append(_str(r.shape_id))
        out.append(struct.pack("<IB", r.label, SPLITS.index(r.split)))
        out += [descriptor_bytes(d) for d in r.bundle.views]
    return b"".join(out)


def write_dataset(ds: Dataset, dest) -> None:
    data = dataset_bytes(ds)
    if hasattr(dest, "write"):
        dest.write(data)
    else:
        with open(dest, "wb") as fh:
            fh.write(data)


def read_dataset(src) -> Dataset:
    if not isinstance(src, (bytes, bytearray, memoryview)) and not hasattr(src, "read"):
        with open(src, "rb") as fh:
            return read_dataset(fh.read())
    fh = _stream(src)
    if _read(fh, 4, "dataset") != DATASET_MAGIC:
        raise BadMagic("not an MLHS dataset")
    version, N, k, ncls = struct.unpack("<IIII", _read(fh, 16, "dataset header"))
    if version != VERSION:
        raise VersionUnsupported(f"MLHS version {version} is not supported")
    classes = [_read_str(fh) for _ in range(ncls)]
    (count,) = struct.unpack("<I", _read(fh, 4, "dataset"))
    records = []
    for _ in range(count):
        sid = _read_str(fh)
        label, split = struct.unpack("<IB", _read(fh, 5, "dataset record"))
        if split >= len(SPLITS):
            raise InvalidParams(f"record {sid}: bad split code {split}")
        views = [read_descriptor(fh) for _ in range(3)]
        if any((d.N, d.k) != (N, k) for d in views):
            raise InvalidParams(f"record {sid}: descriptor shape differs from header")
        records.append(Record(sid, label, SPLITS[split], MultiViewBundle(*views, shape_id=sid)))
    if fh.read(1):
        raise LengthMismatch("trailing bytes after the last dataset record")
    ds = Dataset(classes, records)
    ds.validate()
    return ds


def is_sentinel(values) -> np.ndarray:
    return np.asarray(values) == np.float32(INF)
