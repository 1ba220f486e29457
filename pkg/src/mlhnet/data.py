"""Assemble labelled three-view descriptor datasets."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyClass, InvalidParams, MLHError, ParseError
from .formats import Dataset, Record
from .mesh_io import generate_primitive, load_mesh
from .mlh import compute_bundle
from .sampling import SamplingConfig, make_rng

SYNTHETIC_KINDS = ("box", "sphere", "cylinder", "cone")
MESH_SUFFIXES = (".off", ".obj")


@dataclass(frozen=True)
class SyntheticSpec:
    classes: int = 4
    per_class: int = 200
    jitter: float = 0.01

    def __post_init__(self):
        if not 1 <= self.classes <= len(SYNTHETIC_KINDS):
            raise InvalidParams(f"classes must be in 1..{len(SYNTHETIC_KINDS)}")
        if self.per_class < 1:
            raise EmptyClass("per_class must be >= 1")


def derive_seed(*parts) -> int:
    """A 64-bit seed from integer parts, stable across platforms."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, np.uint64)[0])


def synthetic_params(kind, rng):
    if kind == "box":
        return {"extents": tuple(rng.uniform(0.5, 1.5, 3))}
    if kind == "sphere":
        return {"radius": float(rng.uniform(0.5, 1.5)), "subdivisions": 2}
    return {"radius": float(rng.uniform(0.3, 0.8)), "height": float(rng.uniform(0.6, 2.0)),
            "segments": 32}


def synthetic_shapes(spec: SyntheticSpec, seed: int):
    """``[(shape_id, label, mesh, split)]`` in class-major order.

    Every fifth record (record index mod 5 == 4) is held out for testing.
    """
    out = []
    for label, kind in enumerate(SYNTHETIC_KINDS[:spec.classes]):
        for i in range(spec.per_class):
            rng = make_rng([seed, label, i])
            params = synthetic_params(kind, rng)
            params["jitter"] = spec.jitter
            mesh = generate_primitive(kind, params, seed=derive_seed(seed, label, i, 1))
            idx = len(out)
            out.append((f"{kind}_{i:04d}", label, mesh, "test" if idx % 5 == 4 else "train"))
    return out


def _bundles(items, N, k, seed, workers):
    def one(args):
        idx, (sid, mesh) = args
        cfg = SamplingConfig(rng_seed=derive_seed(seed, idx))
        return compute_bundle(mesh, N, k, cfg, shape_id=sid)

    jobs = list(enumerate(items))
    if workers and workers > 1:
        # map() yields in submission order whatever the scheduling
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(one, jobs))
    return [one(j) for j in jobs]


def build_synthetic_dataset(spec: SyntheticSpec, N=32, k=5, seed=0, workers=1) -> Dataset:
    shapes = synthetic_shapes(spec, seed)
    bundles = _bundles([(s[0], s[2]) for s in shapes], N, k, seed, workers)
    records = [Record(sid, label, split, b)
               for (sid, label, _, split), b in zip(shapes, bundles)]
    return Dataset(list(SYNTHETIC_KINDS[:spec.classes]), records)


def scan_modelnet(root):
    """``(classes, [(path, label, split)])`` for a ``class/{train,test}/*.off`` tree.

    Classes are labelled in sorted name order.
    """
    root = Path(root)
    if not root.is_dir():
        raise InvalidParams(f"{root} is not a directory")
    classes = sorted(p.name for p in root.iterdir() if p.is_dir())
    if not classes:
        raise EmptyClass(f"{root} has no class directories")
    entries = []
    for label, name in enumerate(classes):
        found = 0
        for split in ("train", "test"):
            d = root / name / split
            if not d.is_dir():
                continue
            files = sorted(f for f in d.iterdir() if f.suffix.lower() in MESH_SUFFIXES)
            entries += [(f, label, split) for f in files]
            found += len(files)
        if not found:
            raise EmptyClass(f"class {name!r} has no meshes under {root / name}")
    return classes, entries


def _load(path):
    try:
        return load_mesh(path)
    except (MLHError, OSError, UnicodeError) as exc:
        raise ParseError(path, exc) from exc


def build_modelnet_dataset(root, N=32, k=5, seed=0, workers=1) -> Dataset:
    classes, entries = scan_modelnet(root)
    root = Path(root)
    items = []
    for path, label, split in entries:
        sid = os.path.relpath(path, root).replace(os.sep, "/")
        items.append((sid, _load(path)))
    try:
        bundles = _bundles(items, N, k, seed, workers)
    except MLHError as exc:
        # find the offending shape for a useful message
        for (sid, mesh) in items:
            try:
                compute_bundle(mesh, 1, 1)
            except MLHError as inner:
                raise ParseError(root / sid, inner) from inner
        raise exc
    records = [Record(sid, label, split, b)
               for (path, label, split), (sid, _), b in zip(entries, items, bundles)]
    return Dataset(classes, records)


def build_dataset(source, N=32, k=5, seed=0, workers=1) -> Dataset:
    """``source`` is a :class:`SyntheticSpec` or a ModelNet-style directory."""
    if isinstance(source, SyntheticSpec):
        return build_synthetic_dataset(source, N, k, seed, workers)
    return build_modelnet_dataset(source, N, k, seed, workers)
