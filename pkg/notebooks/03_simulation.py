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
# # Vessel phantom and error injection
#
# A phantom is a branching tube tree with a thin spherical shell around it.
# The catalog holds disjoint errors of five kinds at three severities.  A
# simulation set stacks k randomly drawn errors one at a time, so member k
# holds exactly k errors.

# %%
from collections import Counter

from bavd import build_simulation_set, generate_error_catalog, generate_phantom
from bavd.simulate import validate_catalog

# %%
phantom = generate_phantom(seed=1, dims=(96, 96, 96))
print("segments:", len(phantom.segments), "voxels:", phantom.gt.foreground_count)
print("radii:", sorted({s.radius for s in phantom.segments}))

# %% [markdown]
# ## The catalog
#
# Ids encode kind letter, severity and index.  Kinds: K extra structure,
# P dilation, M missing segment, V thinning, R scattered voxels.

# %%
catalog = generate_error_catalog(phantom, n=55, seed=1)
validate_catalog(phantom, catalog)
print(Counter((e.kind, e.severity) for e in catalog))
for e in catalog[:5]:
    print(e.id, e.polarity, len(e.voxels))

# %% [markdown]
# ## One simulation set

# %%
sim = build_simulation_set(phantom, catalog, k=10, seed=7)
for m in sim.members:
    print(m.name, m.error_count, m.mask.foreground_count, m.error_ids[-1:] or "")
