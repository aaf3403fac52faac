"""Schmidt-coefficient flow when the Hamiltonian vanishes.

With H = 0 the Schmidt bases stay fixed and only the coefficients move:

    dq_l/dt = gamma * q_l * (q_l**2 - L4),     L_n = sum_l q_l**n

which is gradient ascent on ``(gamma/4) (3 - 2 L2) L4``. The largest
coefficient wins and the state relaxes to a product state.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _dopri
from .state import BipartiteShape, PureState, entanglement_entropy

__all__ = [
    "FlowState", "MomentSet", "FlowTrajectory", "flow_rhs", "moments", "moment_rhs",
    "flow_potential", "flow_potential_gradient", "integrate_flow",
    "perturbed_uniform", "cross_check_full",
]


@dataclass(frozen=True)
class FlowState:
    q: np.ndarray
    gamma: float = 1.0

    def __post_init__(self):
        q = np.array(self.q, dtype=float).ravel()
        if np.any(q < 0):
            raise ValueError("Schmidt coefficients must be non-negative")
        if abs(np.sum(q**2) - 1.0) > 1e-9:
            raise ValueError(f"sum(q**2) must be 1, got {np.sum(q**2)!r}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @property
    def m(self) -> int:
        return len(self.q)


@dataclass(frozen=True)
class MomentSet:
    values: dict

    def __post_init__(self):
        v = {int(n): float(x) for n, x in self.values.items()}
        if 2 in v and abs(v[2] - 1.0) > 1e-9:
            raise ValueError(f"L2 must be 1, got {v[2]!r}")
        if {2, 4, 6} <= v.keys() and v[4] ** 2 > v[2] * v[6] + 1e-12:
            raise ValueError("moments violate L4**2 <= L2 * L6")
        object.__setattr__(self, "values", v)

    def __getitem__(self, n):
        return self.values[n]


def _q_of(state):
    return state.q if isinstance(state, FlowState) else np.asarray(state, dtype=float)


def _rhs(q, gamma):
    q2 = q * q
    return gamma * q * (q2 - np.dot(q2, q2))


def flow_rhs(state: FlowState) -> np.ndarray:
    """``dq/dt = gamma q (q**2 - L4)``."""
    return _rhs(state.q, state.gamma)


def moments(state, n_max: int = 6) -> MomentSet:
    """Even power sums ``L_n`` for ``n = 2, 4, ..., n_max``."""
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    q = _q_of(state)
    return MomentSet({n: float(np.sum(q**n)) for n in range(2, int(n_max) + 1, 2)})


def moment_rhs(m: MomentSet, gamma: float, n: int) -> float:
    """``dL_n/dt = n gamma (L_{n+2} - L_n L4)``."""
    vals = m.values if isinstance(m, MomentSet) else m
    missing = [k for k in (n, n + 2, 4) if k not in vals]
    if missing:
        raise ValueError(f"moment_rhs(n={n}) needs L_{missing}")
    return n * gamma * (vals[n + 2] - vals[n] * vals[4])


def flow_potential(state, gamma: float | None = None) -> float:
    """``(gamma/4) (3 - 2 L2) L4``; accepts unnormalized coefficient vectors."""
    q = _q_of(state)
    if gamma is None:
        gamma = state.gamma
    l2, l4 = np.sum(q**2), np.sum(q**4)
    return float(gamma / 4 * (3 - 2 * l2) * l4)


def flow_potential_gradient(state, gamma: float | None = None) -> np.ndarray:
    """Analytic gradient of :func:`flow_potential`; equals the flow on L2 = 1."""
    q = _q_of(state)
    if gamma is None:
        gamma = state.gamma
    l2, l4 = np.sum(q**2), np.sum(q**4)
    return gamma * ((3 - 2 * l2) * q**3 - l4 * q)


@dataclass
class FlowTrajectory:
    t: np.ndarray
    q: np.ndarray
    l4: np.ndarray
    entropy: np.ndarray
    gamma: float
    unique_attractor: bool
    attractor: int | None
    l2: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return len(self.t)


def _has_unique_max(q, rtol=1e-12):
    top = np.sort(q)[::-1]
    return len(top) == 1 or top[0] - top[1] > rtol * top[0]


def integrate_flow(state0: FlowState, t_max: float, *, t_eval=None, rtol=1e-10,
                   atol=1e-14, dt_initial=1e-3, sample_stride=1) -> FlowTrajectory:
    """Integrate the coefficient flow from ``t = 0`` to ``t_max``.

    Samples are recorded at t = 0, every ``sample_stride`` accepted steps and
    at ``t_max``, or exactly at ``t_eval`` if given. Zero coefficients stay
    zero. When the initial maximum is shared by several coefficients the
    flow keeps the tie forever; this is reported through
    ``unique_attractor = False`` and ``attractor = None``.

    Raises
    ------
    StiffnessError
        On step-size underflow.
    """
    q0 = np.array(state0.q)
    gamma = state0.gamma
    rows = []

    def record(t, q):
        q2 = q * q
        rows.append((t, q.copy(), float(np.dot(q2, q2)), float(np.sum(q2))))

    counter = [0]

    def on_step(t, q):
        counter[0] += 1
        if t_eval is None and counter[0] % sample_stride == 0:
            record(t, q)

    f = lambda q: _rhs(q, gamma)  # noqa: E731
    min_dt = 1e-12 * max(t_max, 1.0)
    if t_eval is None:
        record(0.0, q0)
        q, _, _ = _dopri.integrate(f, q0, (0.0, t_max), dt_initial, rtol, atol,
                                   on_step=on_step, min_dt=min_dt)
        if rows[-1][0] != t_max:
            record(float(t_max), q)
    else:
        times = np.asarray(t_eval, dtype=float)
        if np.any(np.diff(times) <= 0) or times[0] < 0:
            raise ValueError("t_eval must be strictly increasing and non-negative")
        q, t_prev, dt = q0, 0.0, dt_initial
        for te in times:
            if te > t_prev:
                q, _, dt = _dopri.integrate(f, q, (t_prev, te), dt, rtol, atol,
                                            on_step=on_step, min_dt=min_dt)
                t_prev = te
            record(float(te), q)

    qs = np.array([r[1] for r in rows])
    unique = _has_unique_max(q0)
    return FlowTrajectory(
        t=np.array([r[0] for r in rows]),
        q=qs,
        l4=np.array([r[2] for r in rows]),
        entropy=np.array([entanglement_entropy(np.clip(x, 0, None)) for x in qs]),
        gamma=gamma,
        unique_attractor=unique,
        attractor=int(np.argmax(q0)) if unique else None,
        l2=np.array([r[3] for r in rows]),
    )


def perturbed_uniform(m: int, index: int = 0, rel: float = 1e-3) -> np.ndarray:
    """Uniform spectrum ``m**-0.5`` with entry ``index`` scaled by ``1 + rel``,
    then renormalized."""
    q = np.full(m, m**-0.5)
    q[index] *= 1 + rel
    return q / np.linalg.norm(q)


def cross_check_full(state0: FlowState, shape: BipartiteShape, t_grid, *,
                     rtol=1e-10, atol=1e-13) -> float:
    """Largest deviation between the reduced flow and the full equation.

    A state with diagonal coefficient matrix ``diag(q0)`` is evolved with
    H = 0 by :func:`disentangle.dynamics.integrate`; its Schmidt spectra at
    ``t_grid`` are compared elementwise to :func:`integrate_flow`.
    """
    from .dynamics import GammaPolicy, SimConfig, integrate
    from .state import schmidt

    if not isinstance(shape, BipartiteShape):
        shape = BipartiteShape(*shape)
    if shape.m != state0.m:
        raise ValueError(f"shape {shape.n1}x{shape.n2} holds {shape.m} Schmidt "
                         f"coefficients, flow state has {state0.m}")
    t_grid = np.asarray(t_grid, dtype=float)
    c0 = np.zeros((shape.n1, shape.n2), dtype=complex)
    c0[np.arange(shape.m), np.arange(shape.m)] = state0.q
    t_end = float(t_grid[-1])
    cfg = SimConfig(dt_initial=min(1e-3, t_end / 10) if t_end > 0 else 1e-3,
                    t_max=t_end, rel_tol=rtol, abs_tol=atol)
    h = np.zeros((shape.dim, shape.dim))
    full = integrate(PureState(c0), h, GammaPolicy.constant(state0.gamma), cfg,
                     t_eval=t_grid, keep_states=True)
    reduced = integrate_flow(state0, t_end, t_eval=t_grid, rtol=rtol, atol=atol)
    dev = 0.0
    for c, q in zip(full.states, reduced.q):
        qs = schmidt(c / np.linalg.norm(c)).q
        dev = max(dev, float(np.max(np.abs(qs - np.sort(q)[::-1]))))
    return dev
