# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#   kernelspec:
#     display_name: Python 3
#     language: python
#     name: python3
# ---

# %% [markdown]
# # AVD versus balanced AVD
#
# Both metrics average point-to-set distances in the two directions.  AVD
# normalizes each direction by its own point count; bAVD divides both sums by
# the ground-truth count, so adding segmentation voxels can never lower it.

# %%
import numpy as np

from bavd import MetricOptions, VoxelMask, evaluate_pair

# %% [markdown]
# ## A four-voxel line
#
# Ground truth holds x = 0; the segmentation adds a false positive at x = 3.

# %%
gt = VoxelMask.from_voxels((4, 1, 1), [(0, 0, 0)])
seg = VoxelMask.from_voxels((4, 1, 1), [(0, 0, 0), (3, 0, 0)])
r = evaluate_pair(gt, seg)
print(r.as_dict())

# swapping the arguments leaves AVD unchanged but not bAVD
print(evaluate_pair(seg, gt).avd, evaluate_pair(seg, gt).bavd)

# %% [markdown]
# ## Diluting a far error
#
# A far false positive costs a lot.  Piling 100 close false positives on top
# makes AVD look better because the far one is now averaged over 111 points.
# bAVD goes up as it should.  The grid is 0.2 mm so every near voxel sits
# exactly 1 mm from the line.

# %%
sp = (0.2, 0.2, 0.2)
dims = (260, 11, 11)
line = [(x, 5, 5) for x in range(10)]
far = [(259, 5, 5)]
offsets = [(5, 0), (-5, 0), (0, 5), (0, -5), (3, 4), (3, -4), (-3, 4), (-3, -4),
           (4, 3), (4, -3), (-4, 3), (-4, -3)]
near = [(x, 5 + dy, 5 + dz) for x in range(10) for dy, dz in offsets][:100]

truth = VoxelMask.from_voxels(dims, line, sp)
opts = MetricOptions(units="physical")
for name, extra in [("far only", far), ("far + near", far + near)]:
    rep = evaluate_pair(truth, VoxelMask.from_voxels(dims, line + extra, sp), opts)
    print(f"{name:11s} S={rep.s_count:3d}  AVD={rep.avd:.4f}  bAVD={rep.bavd:.4f}")

# %% [markdown]
# ## Where bAVD fails
#
# A ground truth with two distant clusters, and a segmentation that only finds
# one.  An extra false positive right next to the missed cluster drops bAVD
# from 25 to 0.5 even though it is still an error.

# %%
gt2 = VoxelMask.from_voxels((101, 1, 1), [(0, 0, 0), (100, 0, 0)])
one = VoxelMask.from_voxels((101, 1, 1), [(0, 0, 0)])
two = VoxelMask.from_voxels((101, 1, 1), [(0, 0, 0), (99, 0, 0)])
print(evaluate_pair(gt2, one).bavd, evaluate_pair(gt2, two).bavd)

# %% [markdown]
# ## Surface points only
#
# ``boundary_only`` keeps foreground voxels with a 6-connected background
# neighbour, and the counts G and S come from those.

# %%
rng = np.random.default_rng(0)
a = VoxelMask(rng.random((20, 20, 20)) < 0.3)
b = VoxelMask(rng.random((20, 20, 20)) < 0.3)
print(evaluate_pair(a, b).avd, evaluate_pair(a, b, MetricOptions(point_mode="boundary_only")).avd)
