# %% [markdown]
# # Basins of attraction on the sphere of initial directions
#
# Every initial direction n1 of the small spin is integrated to t = 30 and
# labelled by where it ends. The two basins are the hemispheres n1.u > 0 and
# n1.u < 0. A coarse grid keeps this quick; `sim basins` runs the 36 x 72 map.

# %%
import numpy as np

from disentangle.measurement import Setup, SphereGrid, basin_map

setup = Setup()  # tilted coupling axis, S2 along -z
grid = SphereGrid(12, 24)
bm = basin_map(grid, setup)

a = bm.alignment()
far = np.abs(a) > 0.05
print("points:", len(grid), " unresolved:", int(np.sum(bm.labels == 0)))
print("label == sign(n1.u) away from the boundary:",
      np.mean(bm.labels[far] == np.sign(a[far])))

# %%
labels = bm.labels.reshape(grid.n_theta, grid.n_phi)
for row in labels:
    print("".join({1: "+", -1: "-", 0: "."}[v] for v in row))

# %%
try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.imshow(labels, extent=[0, 2, 1, 0], aspect="auto", cmap="viridis")
    ax.set_xlabel("phi1 / pi")
    ax.set_ylabel("theta1 / pi")
    fig.savefig("basins.png", dpi=120)
