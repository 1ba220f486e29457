"""Multi-layered height-map descriptors of 3D meshes and three-view CNN classifiers."""
from .mesh_io import TriangleMesh, generate_primitive, load_mesh, parse_obj, parse_off
from .mlh import (INF, POS_X, POS_Y, POS_Z, MLHDescriptor, MultiViewBundle, ViewDirection,
                  compute_bundle, compute_mlh, export_layer_image, orient_and_normalize,
                  percentile)
from .mv_merge import (MultiViewConfig, build_multiview_net, expand_input_weights,
                       forward_multiview, merge_concat_conv, merge_max)
from .sampling import PointCloud, SamplingConfig, required_point_count, sample_surface
from .voxel_oracle import consistency_check, mlh_from_voxels, voxelize_points

__version__ = "0.1.0"
