"""Brute-force voxel occupancy reference used to cross-check MLH descriptors.

Storage comparison: a descriptor holds ``k * N**2`` floats, the occupancy
grid ``N**3`` bits.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParams, PointOutOfRange, ResolutionMismatch
from .mlh import INF, POS_Z, MLHDescriptor, as_view, bin_indices, layer_fractions

TOL = 1e-6


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    R: int
    occupancy: np.ndarray  # (R, R, R) bool indexed [x, y, z]

    @property
    def count(self) -> int:
        return int(self.occupancy.sum())

    def occupied_columns(self) -> np.ndarray:
        return self.occupancy.any(axis=2)


def voxelize_points(points, R: int) -> VoxelGrid:
    """Occupancy of a normalized cloud; index per axis ``min(floor(c*R), R-1)``."""
    if R < 1:
        raise InvalidParams("R must be >= 1")
    pts = getattr(points, "points", points)
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
    if len(pts) and (pts.min() < 0.0 or pts.max() > 1.0):
        raise PointOutOfRange("voxelize_points expects coordinates in [0, 1]")
    occ = np.zeros((R, R, R), dtype=bool)
    idx = bin_indices(pts, R)
    occ[idx[:, 0], idx[:, 1], idx[:, 2]] = True
    return VoxelGrid(R, occ)


def mlh_from_voxels(grid: VoxelGrid, k: int, view=POS_Z) -> MLHDescriptor:
    """Descriptor whose bin heights are the centres of occupied voxels."""
    R = grid.R
    fr = layer_fractions(k)
    centers = (np.arange(R) + 0.5) / R
    out = np.full((R, R, k), INF, dtype=np.float64)
    for i in range(R):
        for j in range(R):
            col = centers[grid.occupancy[i, j]]
            if col.size:
                out[i, j] = np.quantile(col, fr, method="linear")
    return MLHDescriptor(R, k, as_view(view), out.astype(np.float32))


@dataclass
class ConsistencyReport:
    N: int
    R: int
    violations: list = field(default_factory=list)          # (p, q, layers, heights)
    occupancy_mismatches: list = field(default_factory=list)  # (p, q)
    max_deviation: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.violations and not self.occupancy_mismatches

    def as_dict(self) -> dict:
        return {
            "N": self.N,
            "R": self.R,
            "passed": self.passed,
            "violations": len(self.violations),
            "occupancy_mismatches": len(self.occupancy_mismatches),
            "max_deviation": self.max_deviation,
        }


def consistency_check(desc: MLHDescriptor, grid: VoxelGrid) -> ConsistencyReport:
    """Check that every height of ``desc`` is backed by occupied voxels.

    ``grid.R`` must be a multiple of ``desc.N``; each descriptor bin covers an
    ``R/N x R/N`` block of voxel columns.  The extreme layers (bottom and top)
    are real sample heights and must lie within half a voxel of an occupied
    voxel centre.  Interior layers may be interpolated between two samples, so
    they only have to lie within the column's occupied height range.
    """
    N, R, k = desc.N, grid.R, desc.k
    if R % N:
        raise ResolutionMismatch(f"oracle resolution {R} is not a multiple of N={N}")
    m = R // N
    half = 0.5 / R + TOL
    centers = (np.arange(R) + 0.5) / R
    block = grid.occupancy.reshape(N, m, N, m, R).any(axis=(1, 3))  # (N, N, R)
    report = ConsistencyReport(N, R)
    extremes = {0, k - 1}
    for p in range(N):
        for q in range(N):
            hs = desc.grid[p, q].astype(np.float64)
            occupied = hs[0] != np.float32(INF)
            col = centers[block[p, q]]
            if occupied != bool(col.size):
                report.occupancy_mismatches.append((p, q))
            if not occupied:
                continue
            bad = []
            for layer, h in enumerate(hs):
                if not col.size:
                    bad.append(layer)
                    continue
                dist = float(np.abs(col - h).min())
                if layer in extremes:
                    report.max_deviation = max(report.max_deviation, dist)
                    if dist > half:
                        bad.append(layer)
                elif h < col[0] - half or h > col[-1] + half:
                    bad.append(layer)
            if bad:
                report.violations.append((p, q, bad, [float(hs[b]) for b in bad]))
    return report
