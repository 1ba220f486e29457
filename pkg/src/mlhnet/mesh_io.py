"""Triangle meshes: OFF/OBJ parsing, synthetic primitives and measurements."""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    IndexOutOfRange,
    InvalidMesh,
    InvalidParams,
    MalformedHeader,
    MalformedRecord,
    TruncatedFile,
)

__all__ = [
    "TriangleMesh",
    "Aabb",
    "LabeledShape",
    "parse_off",
    "parse_obj",
    "load_mesh",
    "write_off",
    "generate_primitive",
    "surface_area",
    "triangle_areas",
    "bounding_box",
]


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Indexed triangle soup. Arrays are copied and frozen on construction."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.array(self.faces, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(v)):
            raise InvalidMesh("vertex coordinates must be finite")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise IndexOutOfRange(
                f"face index out of range for {len(v)} vertices"
            )
        v.flags.writeable = False
        f.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def triangles(self) -> np.ndarray:
        """(F, 3, 3) corner coordinates."""
        return self.vertices[self.faces]

    def __eq__(self, other):
        if not isinstance(other, TriangleMesh):
            return NotImplemented
        return (
            self.vertices.shape == other.vertices.shape
            and self.faces.shape == other.faces.shape
            and np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.faces, other.faces)
        )

    __hash__ = None


@dataclass(frozen=True)
class Aabb:
    min: np.ndarray
    max: np.ndarray

    @property
    def extent(self) -> np.ndarray:
        return self.max - self.min


@dataclass(frozen=True)
class LabeledShape:
    mesh: TriangleMesh
    label: int
    id: str
    split: str = field(default="train")


def _fan(indices):
    return [(indices[0], indices[j], indices[j + 1]) for j in range(1, len(indices) - 1)]


def _as_text(data) -> str:
    if isinstance(data, (bytes, bytearray, memoryview)):
        return bytes(data).decode("utf-8", errors="replace")
    return data


_OFF_KEYWORD = re.compile(r"^(ST)?C?N?4?n?OFF")


def parse_off(data) -> TriangleMesh:
    """Parse OFF text (``str`` or ``bytes``).

    Polygons with more than three corners are fan-triangulated around their
    first corner.  The ModelNet header quirk where the counts are glued to the
    keyword (``OFF490 518 0``) is accepted.
    """
    lines = []
    for raw in _as_text(data).splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    if not lines:
        raise MalformedHeader("empty OFF file")

    m = _OFF_KEYWORD.match(lines[0])
    if m is None:
        raise MalformedHeader(f"expected OFF keyword, got {lines[0][:20]!r}")
    rest = lines[0][m.end():].split()
    pos = 1
    if not rest:
        if len(lines) < 2:
            raise TruncatedFile("missing OFF counts line")
        rest = lines[1].split()
        pos = 2
    try:
        counts = [int(t) for t in rest[:3]]
    except ValueError:
        raise MalformedHeader(f"bad OFF counts: {rest!r}") from None
    if len(counts) < 2 or counts[0] < 0 or counts[1] < 0:
        raise MalformedHeader(f"bad OFF counts: {rest!r}")
    nv, nf = counts[0], counts[1]

    if len(lines) < pos + nv + nf:
        raise TruncatedFile(
            f"expected {nv} vertices and {nf} faces, file has {len(lines) - pos} records"
        )
    try:
        verts = [[float(t) for t in lines[pos + i].split()[:3]] for i in range(nv)]
    except ValueError as exc:
        raise MalformedRecord(f"bad vertex record: {exc}") from None
    if any(len(v) != 3 for v in verts):
        raise MalformedRecord("vertex record with fewer than 3 coordinates")
    pos += nv

    faces = []
    for i in range(nf):
        toks = lines[pos + i].split()
        try:
            n = int(toks[0])
            idx = [int(t) for t in toks[1:1 + n]]
        except (ValueError, IndexError):
            raise MalformedRecord(f"bad face record {lines[pos + i]!r}") from None
        if len(idx) != n or n < 3:
            raise MalformedRecord(f"bad face record {lines[pos + i]!r}")
        for j in idx:
            if j < 0 or j >= nv:
                raise IndexOutOfRange(f"face {i} references vertex {j} of {nv}")
        faces.extend(_fan(idx))
    return TriangleMesh(np.array(verts, dtype=np.float64).reshape(-1, 3),
                        np.array(faces, dtype=np.int64).reshape(-1, 3))


def parse_obj(data) -> TriangleMesh:
    """Parse the ``v``/``f`` subset of Wavefront OBJ.

    Texture/normal references (``1/2/3``) are dropped and negative indices are
    resolved against the vertex count at the point the face appears.
    """
    verts = []
    faces = []
    for lineno, raw in enumerate(_as_text(data).splitlines(), 1):
        toks = raw.split("#", 1)[0].split()
        if not toks:
            continue
        if toks[0] == "v":
            try:
                verts.append([float(t) for t in toks[1:4]])
            except ValueError:
                raise MalformedRecord(f"line {lineno}: bad vertex") from None
            if len(verts[-1]) != 3:
                raise MalformedRecord(f"line {lineno}: vertex needs 3 coordinates")
        elif toks[0] == "f":
            idx = []
            for t in toks[1:]:
                head = t.split("/", 1)[0]
                try:
                    j = int(head)
                except ValueError:
                    raise MalformedRecord(f"line {lineno}: bad face index {t!r}") from None
                if j > 0:
                    j -= 1
                elif j < 0:
                    j += len(verts)
                else:
                    raise IndexOutOfRange(f"line {lineno}: OBJ indices are 1-based")
                if j < 0 or j >= len(verts):
                    raise IndexOutOfRange(f"line {lineno}: face index {head} out of range")
                idx.append(j)
            if len(idx) < 3:
                raise MalformedRecord(f"line {lineno}: face needs 3 indices")
            faces.extend(_fan(idx))
    return TriangleMesh(np.array(verts, dtype=np.float64).reshape(-1, 3),
                        np.array(faces, dtype=np.int64).reshape(-1, 3))


def load_mesh(path) -> TriangleMesh:
    """Read an ``.off`` or ``.obj`` file, dispatching on the extension."""
    path = str(path)
    with open(path, "rb") as fh:
        data = fh.read()
    if path.lower().endswith(".obj"):
        return parse_obj(data)
    return parse_off(data)


def write_off(mesh: TriangleMesh) -> str:
    # repr() of a float round-trips exactly
    out = ["OFF", f"{len(mesh.vertices)} {len(mesh.faces)} 0"]
    out += [" ".join(repr(float(c)) for c in v) for v in mesh.vertices]
    out += ["3 " + " ".join(str(int(i)) for i in f) for f in mesh.faces]
    return "\n".join(out) + "\n"


def triangle_areas(mesh: TriangleMesh) -> np.ndarray:
    t = mesh.triangles
    return 0.5 * np.linalg.norm(np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]), axis=1)


def surface_area(mesh: TriangleMesh) -> float:
    return float(triangle_areas(mesh).sum())


def bounding_box(mesh: TriangleMesh) -> Aabb:
    if len(mesh.vertices) == 0:
        raise InvalidMesh("mesh has no vertices")
    return Aabb(mesh.vertices.min(axis=0), mesh.vertices.max(axis=0))


# -- synthetic primitives -------------------------------------------------

def _box(ex, ey, ez):
    x, y = ex / 2.0, ey / 2.0
    v = np.array([
        [-x, -y, 0], [x, -y, 0], [x, y, 0], [-x, y, 0],
        [-x, -y, ez], [x, -y, ez], [x, y, ez], [-x, y, ez],
    ], dtype=np.float64)
    f = np.array([
        [0, 2, 1], [0, 3, 2],          # bottom
        [4, 5, 6], [4, 6, 7],          # top
        [0, 1, 5], [0, 5, 4],
        [1, 2, 6], [1, 6, 5],
        [2, 3, 7], [2, 7, 6],
        [3, 0, 4], [3, 4, 7],
    ], dtype=np.int64)
    return v, f


def _icosphere(radius, subdivisions):
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    v = [
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ]
    f = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    v = [np.array(p, dtype=np.float64) / np.linalg.norm(p) for p in v]
    for _ in range(subdivisions):
        cache = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                p = v[a] + v[b]
                v.append(p / np.linalg.norm(p))
                cache[key] = len(v) - 1
            return cache[key]

        nf = []
        for a, b, c in f:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nf += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        f = nf
    return np.array(v) * radius, np.array(f, dtype=np.int64)


def _cylinder(radius, height, segments, top_radius):
    ang = 2.0 * np.pi * np.arange(segments) / segments
    ring = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    # force exact axis extremes so the bounding box is exact
    ring[np.isclose(ring, 0.0, atol=1e-15)] = 0.0
    base = np.column_stack([radius * ring, np.zeros(segments)])
    faces = []
    if top_radius > 0:
        top = np.column_stack([top_radius * ring, np.full(segments, height)])
        v = np.vstack([base, top, [[0, 0, 0]], [[0, 0, height]]])
        cb, ct = 2 * segments, 2 * segments + 1
        for i in range(segments):
            j = (i + 1) % segments
            faces += [[i, j, segments + j], [i, segments + j, segments + i]]
            faces += [[cb, j, i], [ct, segments + i, segments + j]]
    else:
        v = np.vstack([base, [[0, 0, 0]], [[0, 0, height]]])
        cb, apex = segments, segments + 1
        for i in range(segments):
            j = (i + 1) % segments
            faces += [[i, j, apex], [cb, j, i]]
    return v.astype(np.float64), np.array(faces, dtype=np.int64)


def generate_primitive(kind: str, params: dict | None = None, seed: int = 0) -> TriangleMesh:
    """Build a closed primitive mesh.

    ``box``: ``extents`` (3 floats), base on z=0, centred in x/y.
    ``sphere``: ``radius``, ``subdivisions``; centred at the origin.
    ``cylinder`` / ``cone``: ``radius``, ``height``, ``segments`` (multiple of 4);
    base on z=0.

    ``jitter`` (default 0) displaces every vertex by up to ``jitter`` times the
    shape size, drawn from ``seed``; with no jitter the seed is unused.
    """
    p = dict(params or {})
    jitter = float(p.pop("jitter", 0.0))
    if jitter < 0:
        raise InvalidParams("jitter must be >= 0")

    if kind == "box":
        ext = tuple(float(e) for e in p.get("extents", (1.0, 1.0, 1.0)))
        if len(ext) != 3 or min(ext) <= 0:
            raise InvalidParams("box extents must be three positive numbers")
        v, f = _box(*ext)
        size = max(ext)
    elif kind == "sphere":
        r = float(p.get("radius", 1.0))
        sub = int(p.get("subdivisions", 3))
        if r <= 0 or sub < 0:
            raise InvalidParams("sphere needs radius > 0 and subdivisions >= 0")
        v, f = _icosphere(r, sub)
        size = 2 * r
    elif kind in ("cylinder", "cone"):
        r = float(p.get("radius", 0.5))
        h = float(p.get("height", 1.0))
        seg = int(p.get("segments", 32))
        if r <= 0 or h <= 0 or seg < 4 or seg % 4:
            raise InvalidParams(
                f"{kind} needs radius > 0, height > 0 and segments a positive multiple of 4"
            )
        v, f = _cylinder(r, h, seg, r if kind == "cylinder" else 0.0)
        size = max(2 * r, h)
    else:
        raise InvalidParams(f"unknown primitive {kind!r}")

    if jitter > 0:
        rng = np.random.Generator(np.random.Philox(seed))
        v = v + rng.uniform(-jitter * size, jitter * size, size=v.shape)
    return TriangleMesh(v, f)
