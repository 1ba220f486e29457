import numpy as np
import pytest

from mlhnet.errors import PointOutOfRange, ResolutionMismatch
from mlhnet.mlh import INF, POS_Z, MLHDescriptor, compute_mlh_normalized, orient_and_normalize
from mlhnet.sampling import sample_surface
from mlhnet.voxel_oracle import VoxelGrid, consistency_check, mlh_from_voxels, voxelize_points


def shell_count(R):
    """Surface voxels of an R^3 cube, counted face by face with
    inclusion-exclusion over shared edges and corners."""
    faces = 6 * R * R
    edges = 12 * R
    corners = 8
    return faces - edges + corners


def test_single_point_voxel():
    g = voxelize_points(np.array([[0.0, 0.0, 0.0]]), 4)
    assert g.count == 1 and g.occupancy[0, 0, 0]


def test_far_corner_is_clamped():
    g = voxelize_points(np.array([[1.0, 1.0, 1.0]]), 4)
    assert g.count == 1 and g.occupancy[3, 3, 3]


def test_out_of_range_rejected():
    with pytest.raises(PointOutOfRange):
        voxelize_points(np.array([[0.5, 1.2, 0.5]]), 4)


def test_cube_shell_count(unit_cube):
    assert shell_count(16) == 16**3 - 14**3 == 1352
    cloud = sample_surface(unit_cube, 1_000_000, seed=0)
    g = voxelize_points(orient_and_normalize(cloud, POS_Z), 16)
    assert g.count == 1352


def test_empty_grid_gives_sentinels():
    d = mlh_from_voxels(VoxelGrid(4, np.zeros((4, 4, 4), bool)), 3)
    assert (d.grid == np.float32(INF)).all()


def test_voxel_centre_heights():
    occ = np.zeros((4, 4, 4), bool)
    occ[1, 2, [0, 3]] = True
    assert mlh_from_voxels(VoxelGrid(4, occ), 2).grid[1, 2].tolist() == [0.125, 0.875]
    occ[0, 0, :] = True
    assert mlh_from_voxels(VoxelGrid(4, occ), 5).grid[0, 0].tolist() == [
        0.125, 0.3125, 0.5, 0.6875, 0.875]


def test_interior_layers_not_bounded_for_repeated_heights():
    # occupancy forgets multiplicity: the median moves by far more than 1/R
    pts = np.vstack([np.tile([0.5, 0.5, 0.01], (100, 1)), [[0.5, 0.5, 0.99]]])
    d = compute_mlh_normalized(pts, 4, 3)
    o = mlh_from_voxels(voxelize_points(pts, 4), 3)
    diff = np.abs(d.grid[2, 2] - o.grid[2, 2])
    assert diff[0] <= 1 / 4 and diff[2] <= 1 / 4
    assert diff[1] > 0.4


def test_consistency_same_cloud_passes():
    pts = np.random.default_rng(3).random((3000, 3))
    rep = consistency_check(compute_mlh_normalized(pts, 16, 5), voxelize_points(pts, 16))
    assert rep.passed and rep.violations == [] and rep.max_deviation <= 0.5 / 16 + 1e-6


def test_fabricated_height_is_a_violation():
    pts = np.array([[0.1, 0.1, 0.2]])
    grid = voxelize_points(pts, 4)
    g = compute_mlh_normalized(pts, 4, 1).grid.copy()
    g[3, 3, 0] = 0.5
    rep = consistency_check(MLHDescriptor(4, 1, POS_Z, g), grid)
    assert len(rep.violations) == 1
    assert rep.violations[0][:2] == (3, 3)
    assert not rep.passed


def test_shifted_extreme_height_is_a_violation():
    pts = np.array([[0.1, 0.1, 0.2], [0.1, 0.1, 0.9]])
    g = compute_mlh_normalized(pts, 4, 2).grid.copy()
    g[0, 0, 1] = 0.6
    rep = consistency_check(MLHDescriptor(4, 2, POS_Z, g), voxelize_points(pts, 4))
    assert len(rep.violations) == 1 and rep.occupancy_mismatches == []


@pytest.mark.parametrize("R", [32, 64, 128])
def test_cube_fixture_passes(unit_cube, R):
    cloud = sample_surface(unit_cube, 40_960, seed=0)
    norm = orient_and_normalize(cloud, POS_Z)
    rep = consistency_check(compute_mlh_normalized(norm.points, 32, 5), voxelize_points(norm, R))
    assert rep.passed
    assert rep.max_deviation <= 0.5 / R + 1e-6


def test_resolution_mismatch():
    pts = np.random.default_rng(0).random((10, 3))
    with pytest.raises(ResolutionMismatch):
        consistency_check(compute_mlh_normalized(pts, 8, 2), voxelize_points(pts, 12))
