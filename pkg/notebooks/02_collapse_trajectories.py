# %% [markdown]
# # Dipolar measurement: a spin 1/2 collapses onto +u or -u
#
# Spin 1/2 (direction n1) couples to a spin 21/2 (pointing along -z) through
# `omega_d (S1.u)(S2.u)`. With the disentangling term switched on the state
# returns to a product state, and the small spin ends up along +u or -u,
# whichever hemisphere it started in.

# %%
import numpy as np

from disentangle.dynamics import GammaPolicy, SimConfig, integrate
from disentangle.measurement import classify_outcome
from disentangle.validation import COLLAPSE_CASES, collapse_setup

# %%
runs = {}
for case in COLLAPSE_CASES:
    psi, h, n1, u = collapse_setup(case)
    tr = integrate(psi, h, GammaPolicy.constant(1.0), SimConfig(t_max=30.0))
    runs[case] = tr
    print(f"case {case}: n1.u={n1 @ u:+.3f}  min purity={tr.purity.min():.3f}  "
          f"final purity={tr.purity[-1]:.6f}  k.u={tr.k[-1] @ u:+.6f}  "
          f"outcome={classify_outcome(tr, u).name}")

# %% [markdown]
# Switching the disentangling rate off gives ordinary quantum mechanics:
# the purity oscillates and never settles.

# %%
psi, h, n1, u = collapse_setup(4)
plain = integrate(psi, h, GammaPolicy.constant(0.0), SimConfig(t_max=30.0))
print("gamma = 0: purity range", plain.purity.min(), plain.purity.max())

# %%
try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for case, tr in runs.items():
        ax1.plot(tr.t, tr.purity, label=f"case {case}")
        ax2.plot(tr.t, tr.k @ COLLAPSE_CASES[case][1], label=f"case {case}")
    ax1.plot(plain.t, plain.purity, "k:", lw=0.8, label="gamma = 0")
    ax1.set_xlabel("omega_d t")
    ax1.set_ylabel("purity")
    ax2.set_xlabel("omega_d t")
    ax2.set_ylabel("k . u")
    ax1.legend()
    fig.tight_layout()
    fig.savefig("collapse_trajectories.png", dpi=120)
