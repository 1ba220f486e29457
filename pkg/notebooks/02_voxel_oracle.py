"""
Checking descriptors against an occupancy grid
==============================================

An independent way to get column heights is to voxelise the same point cloud
and read heights off the occupied voxels.  Occupancy agrees exactly with the
descriptor, and the lowest and highest layers agree to within one voxel.
Interior layers are only comparable when voxels do not hide how many points
they hold.
"""

# %%
import numpy as np

from mlhnet.mesh_io import generate_primitive
from mlhnet.mlh import POS_Z, compute_mlh_normalized, orient_and_normalize
from mlhnet.sampling import sample_surface
from mlhnet.voxel_oracle import consistency_check, mlh_from_voxels, voxelize_points

mesh = generate_primitive("sphere", {"radius": 1.0, "subdivisions": 3})
cloud = sample_surface(mesh, 60_000, seed=0)
norm = orient_and_normalize(cloud, POS_Z)

# %%
# Same cloud, two routes.
N = R = 32
desc = compute_mlh_normalized(norm.points, N, 2, POS_Z)
grid = voxelize_points(norm, R)
ref = mlh_from_voxels(grid, 2, POS_Z)
occ = desc.occupied
print("occupancy identical:", np.array_equal(occ, ref.occupied))
print("max |difference| on extremes:", float(np.abs(desc.grid[occ] - ref.grid[occ]).max()),
      "bound", 1 / R)

# %%
# The consistency check bundles these comparisons and allows a finer oracle
# grid (any multiple of N).
for R in (32, 64, 128):
    rep = consistency_check(compute_mlh_normalized(norm.points, N, 5, POS_Z),
                            voxelize_points(norm, R))
    print(R, rep.passed, len(rep.violations), round(rep.max_deviation, 5))

# %%
# Why interior layers are not compared on general clouds: occupancy drops
# multiplicity.  A hundred points near the floor and one near the ceiling
# give a median near the floor, while the voxel column has just two
# occupied cells and its median sits halfway.
pts = np.array([[0.5, 0.5, 0.01]] * 100 + [[0.5, 0.5, 0.99]])
print("descriptor median", compute_mlh_normalized(pts, 1, 3, POS_Z).grid[0, 0, 1])
# at R=4 the point column is voxel column (2, 2), occupied in layers 0 and 3
print("voxel median     ", mlh_from_voxels(voxelize_points(pts, 4), 3).grid[2, 2, 1])
