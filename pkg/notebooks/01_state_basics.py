# %% [markdown]
# # Bipartite states, purity and the disentanglement operator
#
# A pure state of two subsystems is stored as its coefficient matrix C
# (shape n1 x n2). Its singular values are the Schmidt coefficients, and the
# purity of either reduced state is sum(q**4).

# %%
import numpy as np

from disentangle import state

rng = np.random.default_rng(0)

# %% [markdown]
# A product state has purity 1, a Bell state 1/2.

# %%
up = np.array([1.0, 0.0])
plus = np.array([1.0, 1.0]) / np.sqrt(2)
prod = state.product_state(up, plus)
bell = np.array([[1, 0], [0, 1]]) / np.sqrt(2)

for name, psi in [("product", prod), ("bell", bell)]:
    rep = state.entanglement_report(psi)
    print(f"{name:8s} purity={rep.purity:.3f} <Q>={rep.q_expectation:.3f} S={rep.entropy:.3f}")

# %% [markdown]
# Q acting on a state can be written three ways: term by term over all 2x2
# minors, as an explicit matrix, or as `Tr(C^dag C) C - C C^dag C`. They agree.

# %%
c = state.random_state(3, 4, rng).c
q_minors = state.apply_q(c)
q_dense = (state.dense_q(c) @ c.ravel()).reshape(3, 4)
q_fast = state.q_action(c)
print("minors vs dense :", np.abs(q_minors - q_dense).max())
print("minors vs matrix:", np.abs(q_minors - q_fast).max())
print("<Q> vs 1 - P    :", np.vdot(c, q_minors).real, 1 - state.purity(c))

# %% [markdown]
# Purity is unchanged by local unitaries; the Schmidt spectrum too.

# %%
u1, u2 = state.random_unitary(3, rng), state.random_unitary(4, rng)
c2 = u1 @ c @ u2.T
print(state.schmidt(c).q)
print(state.schmidt(c2).q)

# %% [markdown]
# For two qubits the purity has the closed form 1 - 2|ad - bc|^2, so
# <Q> never exceeds 1/2.

# %%
qs = [np.vdot(s.c, state.apply_q(s.c)).real
      for s in (state.random_state(2, 2, rng) for _ in range(5000))]
print("largest <Q> seen:", max(qs))
