"""
From a mesh to a handful of cuboids
===================================

Walk a chair-like shape through voxelization, coarse-graining,
floor segmentation and merging, printing what each stage produces.
"""

import tempfile
from pathlib import Path

from cuboidlayout.abstraction import MergeConfig, abstract_voxels, coarse_grain, excess_ratio, segment_projection
from cuboidlayout.mesh_io import box_mesh, normalize, parse_obj, write_obj
from cuboidlayout.synthetic import make_shape
from cuboidlayout.voxels import voxelize

# A closed box mesh goes through the whole front end: parse, normalize, voxelize.
tmp = Path(tempfile.mkdtemp())
write_obj(box_mesh((0, 0, 0), (2.0, 0.5, 1.0)), tmp / "slab.obj")
mesh, record = normalize(parse_obj(tmp / "slab.obj"))
grid = voxelize(mesh, 32)
print(f"slab: {int(grid.occupancy.sum())} voxels at n=32, scale {record.scale:.3f}")

# The synthetic suite has furniture archetypes already voxelized at n=64.
chair = make_shape("chair", 64)
print(f"chair: {int(chair.occupancy.sum())} occupied voxels")

# Coarse-graining alone is exact but produces many small boxes.
coarse = coarse_grain(chair)
print(f"coarse-grained: {len(coarse)} disjoint cuboids")

# The floor projection is split into at most k rectangles first.
regions = segment_projection(chair, k=8)
print(f"floor regions: {len(regions)}")

# Merging collapses the coarse boxes; a larger tau_max allows looser merges.
for tau_max in (1.0, 1.5, 2.0):
    merged = abstract_voxels(chair, MergeConfig(tau_min=1.0, tau_max=tau_max))
    print(f"tau_max={tau_max}: {len(merged):3d} cuboids, excess volume {excess_ratio(merged, chair):.3f}")

for c in abstract_voxels(chair):
    print("  box at", c.min_corner, "extent", c.extent)
