"""Multi-layered height-map (MLH) descriptors.

A descriptor is an ``N x N x k`` float32 grid.  Each bin of the reference grid
holds ``k`` percentiles of the heights of the surface points projecting into
it: layer 1 is the lowest surface, layer ``k`` the highest.  Empty bins carry
the sentinel :data:`INF` in every layer.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyCloud, EmptyList, InvalidParams, LayerOutOfRange
from .mesh_io import TriangleMesh
from .sampling import PointCloud, SamplingConfig, required_point_count, sample_surface

INF = 1.2

# view -> column order producing the rotated (x', y', z') with z' = view axis
_AXIS_PERM = {"x": (1, 2, 0), "y": (2, 0, 1), "z": (0, 1, 2)}
_AXIS_TAG = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class ViewDirection:
    """One of the canonical axes, or a custom unit normal.

    For a custom normal the in-plane grid orientation is the caller's choice:
    ``up`` fixes the grid's second axis (projected onto the plane).  Without it
    the world axis least aligned with the normal is used.
    """

    axis: str | None = None
    normal: tuple | None = None
    up: tuple | None = None
    # float32 normal exactly as read from a descriptor file, so that writing
    # the view back reproduces the original bytes
    stored: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.axis is not None:
            if self.axis not in _AXIS_PERM:
                raise InvalidParams(f"unknown view axis {self.axis!r}")
            return
        if self.normal is None:
            raise InvalidParams("a view needs an axis or a normal")
        n = np.asarray(self.normal, dtype=np.float64)
        if n.shape != (3,) or not abs(np.linalg.norm(n) - 1.0) <= 1e-9:
            raise InvalidParams("custom view normal must be a unit 3-vector")
        object.__setattr__(self, "normal", tuple(float(c) for c in n))

    @classmethod
    def custom(cls, normal, up=None):
        return cls(normal=tuple(normal), up=None if up is None else tuple(up))

    def encoded_normal(self) -> np.ndarray:
        """The normal as little-endian float32 triple for file headers."""
        src = self.stored if self.stored is not None else self.normal
        return np.asarray(src, dtype="<f4")

    @property
    def tag(self) -> int:
        return 3 if self.axis is None else _AXIS_TAG[self.axis]

    def rotation(self) -> np.ndarray:
        """Rows are the grid x-axis, grid y-axis and view direction."""
        if self.axis is not None:
            return np.eye(3)[list(_AXIS_PERM[self.axis])]
        n = np.array(self.normal)
        if self.up is not None:
            u = np.asarray(self.up, dtype=np.float64)
        else:
            u = np.eye(3)[int(np.argmin(np.abs(n)))]
        e2 = u - (u @ n) * n
        if np.linalg.norm(e2) < 1e-12:
            raise InvalidParams("up vector is parallel to the view normal")
        e2 /= np.linalg.norm(e2)
        e1 = np.cross(e2, n)
        return np.stack([e1, e2, n])


POS_X = ViewDirection("x")
POS_Y = ViewDirection("y")
POS_Z = ViewDirection("z")
CANONICAL_VIEWS = (POS_X, POS_Y, POS_Z)


def as_view(v) -> ViewDirection:
    if isinstance(v, ViewDirection):
        return v
    if isinstance(v, str):
        return ViewDirection(v.lower())
    return ViewDirection.custom(v)


@dataclass(frozen=True, eq=False)
class MLHDescriptor:
    N: int
    k: int
    view: ViewDirection
    grid: np.ndarray  # (N, N, k) float32, grid[p, q, layer]

    def __post_init__(self):
        g = np.ascontiguousarray(self.grid, dtype=np.float32)
        if g.shape != (self.N, self.N, self.k):
            raise InvalidParams(f"grid shape {g.shape} != {(self.N, self.N, self.k)}")
        object.__setattr__(self, "grid", g)

    @property
    def occupied(self) -> np.ndarray:
        return self.grid[:, :, 0] != np.float32(INF)

    def equals(self, other: "MLHDescriptor") -> bool:
        """Bitwise equality, including the view."""
        return (
            self.N == other.N and self.k == other.k and self.view == other.view
            and self.grid.tobytes() == other.grid.tobytes()
        )


@dataclass(frozen=True)
class MultiViewBundle:
    x: MLHDescriptor
    y: MLHDescriptor
    z: MLHDescriptor
    shape_id: str = ""

    def __post_init__(self):
        if len({(d.N, d.k) for d in self.views}) != 1:
            raise InvalidParams("bundle descriptors must share N and k")

    @property
    def views(self):
        return (self.x, self.y, self.z)

    @property
    def N(self):
        return self.x.N

    @property
    def k(self):
        return self.x.k

    def as_array(self) -> np.ndarray:
        """(3, k, N, N) channels-first stack in X, Y, Z order."""
        return np.stack([d.grid.transpose(2, 0, 1) for d in self.views])


def orient_and_normalize(cloud, view) -> PointCloud:
    """Rotate ``view`` onto +Z, then fit the cloud into the unit cube.

    Scaling is isotropic (by the largest extent) and anchored at the rotated
    bounding-box minimum.
    """
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    pts = pts.reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyCloud("cannot normalize an empty cloud")
    view = as_view(view)
    if view.axis is not None:
        rot = pts[:, list(_AXIS_PERM[view.axis])]
    else:
        rot = pts @ view.rotation().T
    lo = rot.min(axis=0)
    extent = float((rot.max(axis=0) - lo).max())
    if extent == 0.0:
        return PointCloud(np.zeros_like(rot))
    out = (rot - lo) / extent
    assert out.max() <= 1.0 + 1e-6
    return PointCloud(np.clip(out, 0.0, 1.0))


def percentile(values, fraction: float) -> float:
    """Linear-interpolation percentile at rank ``fraction * (n - 1)``."""
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if v.size == 0:
        raise EmptyList("percentile of an empty list")
    if not 0.0 <= fraction <= 1.0:
        raise InvalidParams("fraction must lie in [0, 1]")
    r = fraction * (v.size - 1)
    lo = int(np.floor(r))
    hi = min(lo + 1, v.size - 1)
    out = v[lo] + (v[hi] - v[lo]) * (r - lo)
    return float(min(max(out, v[lo]), v[hi]))


def layer_fractions(k: int) -> np.ndarray:
    if k < 1:
        raise InvalidParams("k must be >= 1")
    if k == 1:
        return np.zeros(1)
    return np.arange(k) / (k - 1)


def bin_indices(coords: np.ndarray, N: int) -> np.ndarray:
    """``min(floor(c * N), N - 1)`` for coordinates in [0, 1]."""
    return np.minimum(np.floor(coords * N).astype(np.int64), N - 1)


def column_percentiles(cols: np.ndarray, heights: np.ndarray, n_cols: int,
                       k: int) -> np.ndarray:
    """Per-column layer values, ``(n_cols, k)`` float64, INF where empty.

    ``cols`` are flat column ids; the height multiset of each column is sorted
    and sampled at the layer fractions with the same rule as :func:`percentile`.
    """
    out = np.full((n_cols, k), INF, dtype=np.float64)
    if len(cols) == 0:
        return out
    order = np.lexsort((heights, cols))
    z = heights[order]
    counts = np.bincount(cols, minlength=n_cols)
    starts = np.cumsum(counts) - counts
    occ = np.nonzero(counts)[0]
    n = counts[occ]
    s = starts[occ]
    for i, f in enumerate(layer_fractions(k)):
        r = f * (n - 1)
        lo = np.floor(r).astype(np.int64)
        hi = np.minimum(lo + 1, n - 1)
        zlo, zhi = z[s + lo], z[s + hi]
        val = zlo + (zhi - zlo) * (r - lo)
        out[occ, i] = np.clip(val, zlo, zhi)
    return out


def compute_mlh_normalized(points: np.ndarray, N: int, k: int, view=POS_Z) -> MLHDescriptor:
    """Descriptor of a cloud that is already oriented and inside [0, 1]^3."""
    if N < 1 or k < 1:
        raise InvalidParams("N and k must be >= 1")
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    p = bin_indices(points[:, 0], N)
    q = bin_indices(points[:, 1], N)
    vals = column_percentiles(p * N + q, points[:, 2], N * N, k)
    return MLHDescriptor(N, k, as_view(view), vals.reshape(N, N, k).astype(np.float32))


def compute_mlh(cloud, N: int, k: int, view=POS_Z) -> MLHDescriptor:
    view = as_view(view)
    norm = orient_and_normalize(cloud, view)
    return compute_mlh_normalized(norm.points, N, k, view)


def compute_bundle(mesh: TriangleMesh, N: int, k: int,
                   sampling_config: SamplingConfig | None = None,
                   shape_id: str = "") -> MultiViewBundle:
    """Three canonical-axis descriptors from one shared surface sample."""
    cfg = sampling_config or SamplingConfig()
    n = required_point_count(mesh, N, k, cfg)
    cloud = sample_surface(mesh, n, cfg.rng_seed)
    return MultiViewBundle(*(compute_mlh(cloud, N, k, v) for v in CANONICAL_VIEWS),
                           shape_id=shape_id)


def export_layer_image(desc: MLHDescriptor, layer: int) -> np.ndarray:
    """8-bit image of one layer (1-based): heights to 0..254, empty to 255.

    Image row 0 is grid row ``q = N - 1`` so that +y points up.
    """
    if not 1 <= layer <= desc.k:
        raise LayerOutOfRange(f"layer {layer} not in 1..{desc.k}")
    h = desc.grid[:, :, layer - 1].astype(np.float64)
    img = np.where(h == np.float32(INF), 255, np.rint(np.clip(h, 0, 1) * 254))
    return img.T[::-1].astype(np.uint8)


def save_image(img: np.ndarray, path) -> None:
    """Write an 8-bit grayscale image; ``.pgm`` gives binary P5, else PNG."""
    from PIL import Image

    path = str(path)
    fmt = "PPM" if path.lower().endswith((".pgm", ".pnm")) else "PNG"
    Image.fromarray(np.ascontiguousarray(img, dtype=np.uint8)).save(path, format=fmt)
