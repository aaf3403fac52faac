"""Time evolution under the Schrodinger equation with a disentangling term.

    d|psi>/dt = [-i H - gamma (Q - <Q>)] |psi>

Q is the state-dependent disentanglement operator of :mod:`.state`. The
gamma term is norm preserving in exact arithmetic; the integrator can
renormalize after each accepted step to remove discretization drift.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _dopri
from ._dopri import StiffnessError
from .spin import (DipolarHamiltonian, SpinOperators, _spin, bloch_vector,
                   local_expectation, spin_matrices)
from .state import PureState, _as_matrix, _check_normalized, q_action

__all__ = [
    "GammaPolicy", "SimConfig", "Trajectory", "StiffnessError",
    "nlse_rhs", "integrate", "gamma_from_coupling", "short_time_purity",
    "short_time_precession_rates", "unitary_evolve", "integrate_batch",
]


def _operator_action(h, n1, n2):
    """Return ``c -> H c`` on coefficient matrices."""
    if isinstance(h, DipolarHamiltonian):
        a, b = h.factors
        if a.shape[0] != n1 or b.shape[0] != n2:
            raise ValueError(
                f"Hamiltonian acts on {a.shape[0]}x{b.shape[0]}, state is {n1}x{n2}")
        bt = b.T
        return lambda c: a @ c @ bt
    h = np.asarray(h)
    if h.shape != (n1 * n2, n1 * n2):
        raise ValueError(f"Hamiltonian shape {h.shape} does not match state {n1}x{n2}")
    if not np.any(h):
        return None
    return lambda c: (h @ c.ravel()).reshape(n1, n2)


@dataclass(frozen=True)
class GammaPolicy:
    """Disentanglement rate: a fixed value, or ``sqrt(<V^dag V>)`` of a coupling."""

    gamma: float = 1.0
    coupling: object = None

    def __post_init__(self):
        if self.coupling is None and not self.gamma >= 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma!r}")

    @classmethod
    def constant(cls, gamma: float) -> "GammaPolicy":
        return cls(gamma=float(gamma))

    @classmethod
    def coupling_driven(cls, v) -> "GammaPolicy":
        return cls(gamma=float("nan"), coupling=v)

    @property
    def is_constant(self) -> bool:
        return self.coupling is None


@dataclass(frozen=True)
class SimConfig:
    dt_initial: float = 1e-3
    t_max: float = 30.0
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    renorm_each_step: bool = True
    sample_stride: int = 1

    def __post_init__(self):
        if not self.dt_initial > 0:
            raise ValueError("dt_initial must be positive")
        if not self.t_max >= 0:
            raise ValueError("t_max must be non-negative")
        if self.t_max > 0 and not self.dt_initial < self.t_max:
            raise ValueError("dt_initial must be smaller than t_max")
        for name in ("rel_tol", "abs_tol"):
            tol = getattr(self, name)
            if not 0 < tol <= 1e-2:
                raise ValueError(f"{name} must lie in (0, 1e-2], got {tol!r}")
        if int(self.sample_stride) != self.sample_stride or self.sample_stride < 1:
            raise ValueError("sample_stride must be a positive integer")


@dataclass
class Trajectory:
    """Sampled observables of one run.

    ``k`` is the spin-1/2 Bloch vector of subsystem 1 (NaN when ``n1 != 2``).
    """

    t: np.ndarray
    k: np.ndarray
    purity: np.ndarray
    q_expectation: np.ndarray
    norm_error: np.ndarray
    final_state: PureState
    n_steps: int = 0
    states: list = field(default_factory=list, repr=False)

    def __len__(self):
        return len(self.t)


class _Recorder:
    def __init__(self, keep_states=False):
        self.rows = []
        self.states = [] if keep_states else None
        self.last_c = None

    def __call__(self, t, c):
        norm2 = np.vdot(c, c).real
        s2 = c.conj().T @ c
        pur = float(np.real(np.sum(s2 * s2.T)) / norm2**2)
        if c.shape[0] == 2:
            k = bloch_vector(c) / norm2
        else:
            k = np.full(3, np.nan)
        self.rows.append((float(t), k, pur, np.sqrt(norm2)))
        if self.states is not None:
            self.states.append(c.copy())

    def trajectory(self, final_c, n_steps):
        t = np.array([r[0] for r in self.rows])
        k = np.array([r[1] for r in self.rows]).reshape(-1, 3)
        pur = np.array([r[2] for r in self.rows])
        nrm = np.array([r[3] for r in self.rows])
        c = final_c / np.linalg.norm(final_c)
        return Trajectory(t=t, k=k, purity=pur, q_expectation=1.0 - pur,
                          norm_error=np.abs(nrm - 1.0), final_state=PureState(c),
                          n_steps=n_steps, states=self.states or [])


def _q_mean(c):
    """``<Q>`` from the trace identity ``<c|Q|c> = |c|^4 - Tr((C^dag C)^2)``,
    divided by ``|c|^2``; kept independent of :func:`q_action`."""
    g = c @ c.conj().T if c.shape[0] <= c.shape[1] else c.conj().T @ c
    norm2 = np.trace(g).real
    return (norm2 * norm2 - np.sum(np.abs(g) ** 2)) / norm2


def _make_rhs(n1, n2, h, policy: GammaPolicy):
    apply_h = _operator_action(h, n1, n2)
    gamma, apply_v = policy.gamma, None
    if not policy.is_constant:
        apply_v = _operator_action(policy.coupling, n1, n2)
        if apply_v is None:  # vanishing coupling: no disentanglement
            gamma = 0.0

    def rhs(c):
        if apply_v is None:
            g = gamma
        else:
            vc = apply_v(c)
            g = np.sqrt(np.vdot(vc, vc).real / np.vdot(c, c).real)
        if apply_h is None:
            out = np.zeros_like(c)
        else:
            out = -1j * apply_h(c)
        if g:
            out -= g * (q_action(c) - _q_mean(c) * c)
        return out

    return rhs


def nlse_rhs(psi, h, gamma: float) -> np.ndarray:
    """Right-hand side ``-i H psi - gamma (Q psi - <Q> psi)`` as an n1 x n2 matrix."""
    c = _as_matrix(psi)
    _check_normalized(c)
    if not gamma >= 0:
        raise ValueError("gamma must be >= 0")
    return _make_rhs(*c.shape, h, GammaPolicy.constant(gamma))(c)


def gamma_from_coupling(psi, v) -> float:
    """``sqrt(<psi| V^dag V |psi>)``, the coupling-driven disentanglement rate."""
    c = _as_matrix(psi)
    vc = _operator_action(v, *c.shape)
    if vc is None:
        return 0.0
    w = vc(c)
    return float(np.sqrt(np.vdot(w, w).real))


def integrate(psi0, h, policy=None, config: SimConfig | None = None, *,
              t_eval=None, keep_states=False) -> Trajectory:
    """Integrate from ``t = 0`` to ``config.t_max``.

    Samples are taken at t = 0, every ``sample_stride`` accepted steps, and
    at the final time. If ``t_eval`` is given, samples are taken exactly at
    those times instead (they must be increasing and within ``[0, t_max]``).

    Raises
    ------
    StiffnessError
        If the step size underflows; ``exc.partial`` is the trajectory so far.
    """
    if config is None:
        config = SimConfig()
    if policy is None:
        policy = GammaPolicy.constant(1.0)
    elif not isinstance(policy, GammaPolicy):
        policy = GammaPolicy.constant(policy)
    c0 = np.array(_as_matrix(psi0), dtype=complex)
    _check_normalized(c0)
    n1, n2 = c0.shape
    rhs = _make_rhs(n1, n2, h, policy)

    post = None
    if config.renorm_each_step:
        def post(c):
            return c / np.sqrt(np.vdot(c, c).real)

    rec = _Recorder(keep_states)
    stride = int(config.sample_stride)
    counter = [0]

    def on_step(t, c):
        counter[0] += 1
        if t_eval is None and counter[0] % stride == 0:
            rec(t, c)
        rec.last_c = c

    min_dt = 1e-12 * config.t_max
    c = c0
    if t_eval is None:
        rec(0.0, c0)
        try:
            c, n, _ = _dopri.integrate(rhs, c0, (0.0, config.t_max), config.dt_initial,
                                       config.rel_tol, config.abs_tol, on_step=on_step,
                                       post_step=post, min_dt=min_dt)
        except StiffnessError as exc:
            last = rec.last_c if rec.last_c is not None else c0
            exc.partial = rec.trajectory(last, counter[0])
            raise
        if rec.rows[-1][0] != config.t_max:
            rec(config.t_max, c)
        return rec.trajectory(c, counter[0])

    times = np.asarray(t_eval, dtype=float)
    if np.any(np.diff(times) <= 0) or times[0] < 0 or times[-1] > config.t_max * (1 + 1e-12):
        raise ValueError("t_eval must be strictly increasing within [0, t_max]")
    t_prev, dt = 0.0, config.dt_initial
    try:
        for te in times:
            if te > t_prev:
                c, _, dt = _dopri.integrate(rhs, c, (t_prev, te), dt, config.rel_tol,
                                            config.abs_tol, on_step=on_step,
                                            post_step=post, min_dt=min_dt)
                t_prev = te
            rec(te, c)
    except StiffnessError as exc:
        exc.partial = rec.trajectory(c, counter[0])
        raise
    return rec.trajectory(c, counter[0])


def unitary_evolve(psi0, h, t: float) -> PureState:
    """Standard Schrodinger evolution ``exp(-i H t) psi0`` by matrix exponential."""
    from scipy.linalg import expm

    c = _as_matrix(psi0)
    hm = h.matrix if isinstance(h, DipolarHamiltonian) else np.asarray(h)
    v = expm(-1j * t * hm) @ c.ravel()
    return PureState(v.reshape(c.shape) / np.linalg.norm(v))


def short_time_purity(n1, n2, u_d, s2, omega_d: float, t) -> float:
    """Short-time purity estimate for two initially coherent spins.

    ``1 - (2**-1.5 * S2 * |n1 x u_d| * (n2 . u_d) * omega_d * t)**2``. The
    expression is proportional to ``n2 . u_d``; it says nothing useful when
    the second spin starts perpendicular to the coupling axis.
    """
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be >= 0")
    n1, n2, u_d = (np.asarray(x, dtype=float) for x in (n1, n2, u_d))
    S2 = _spin(s2).s
    x = 2**-1.5 * S2 * np.linalg.norm(np.cross(n1, u_d)) * np.dot(n2, u_d) * omega_d * np.asarray(t)
    return 1.0 - x**2


def short_time_precession_rates(psi, u_d, omega_d: float, s1=None, s2=None):
    """Mean-field precession rates ``(omega_1, omega_2)``.

    ``omega_1 = omega_d <S2 . u_d>`` drives spin 1 and
    ``omega_2 = omega_d <S1 . u_d>`` drives spin 2.
    """
    c = _as_matrix(psi)
    _check_normalized(c)
    n1, n2 = c.shape
    ops1 = spin_matrices(s1 if s1 is not None else _dim_to_spin(n1))
    ops2 = spin_matrices(s2 if s2 is not None else _dim_to_spin(n2))
    u = np.asarray(u_d, dtype=float)
    w1 = omega_d * local_expectation(c, ops2.dot(u), 2)
    w2 = omega_d * local_expectation(c, ops1.dot(u), 1)
    return w1, w2


def _dim_to_spin(n: int):
    return _spin(f"{n - 1}/2")


def spin_expectation(psi, ops: SpinOperators, subsystem: int) -> np.ndarray:
    """``<S>`` of one subsystem as a real 3-vector."""
    return np.array([local_expectation(psi, op, subsystem) for op in ops])


def _batch_operator_action(h, n1, n2):
    if isinstance(h, DipolarHamiltonian):
        a, b = h.factors
        if a.shape[0] != n1 or b.shape[0] != n2:
            raise ValueError("Hamiltonian does not match the state dimensions")
        bt = b.T

        def act(c):
            # one GEMM per factor instead of B tiny ones
            x = (c.reshape(-1, n2) @ bt).reshape(-1, n1, n2)
            y = a @ x.transpose(1, 0, 2).reshape(n1, -1)
            return y.reshape(n1, -1, n2).transpose(1, 0, 2)
        return act
    h = np.asarray(h)
    if h.shape != (n1 * n2, n1 * n2):
        raise ValueError(f"Hamiltonian shape {h.shape} does not match state {n1}x{n2}")
    if not np.any(h):
        return None
    ht = h.T
    return lambda c: (c.reshape(len(c), -1) @ ht).reshape(c.shape)


def _batch_q_action(c):
    ch = c.conj().swapaxes(1, 2)
    if c.shape[1] <= c.shape[2]:
        g = c @ ch
        ccc = g @ c
    else:
        g = ch @ c
        ccc = c @ g
    norm2 = np.trace(g, axis1=1, axis2=2).real
    q_mean = (norm2 * norm2 - np.sum(np.abs(g.reshape(len(g), -1)) ** 2, axis=1)) / norm2
    return norm2[:, None, None] * c - ccc, norm2, q_mean


def integrate_batch(c0, h, policy=None, config: SimConfig | None = None):
    """Integrate a stack of initial states ``c0`` (shape ``(B, n1, n2)``).

    All members share one adaptive step sized so that every member meets
    the tolerances. Only final states are returned, normalized, as an array
    of the same shape.
    """
    if config is None:
        config = SimConfig()
    if policy is None:
        policy = GammaPolicy.constant(1.0)
    elif not isinstance(policy, GammaPolicy):
        policy = GammaPolicy.constant(policy)
    c0 = np.array(c0, dtype=complex)
    if c0.ndim != 3:
        raise ValueError("expected a (B, n1, n2) stack of coefficient matrices")
    norms = np.einsum("bij,bij->b", c0.conj(), c0).real
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise ValueError("initial states must be normalized")
    _, n1, n2 = c0.shape
    apply_h = _batch_operator_action(h, n1, n2)
    gamma, apply_v = policy.gamma, None
    if not policy.is_constant:
        apply_v = _batch_operator_action(policy.coupling, n1, n2)
        if apply_v is None:
            gamma = 0.0

    def rhs(c):
        out = np.zeros_like(c) if apply_h is None else -1j * apply_h(c)
        if apply_v is None:
            g = gamma
            if not g:
                return out
        else:
            vc = apply_v(c)
            vv = np.einsum("bij,bij->b", vc.conj(), vc).real
            cc = np.einsum("bij,bij->b", c.conj(), c).real
            g = np.sqrt(vv / cc)[:, None, None]
        qc, _, q_mean = _batch_q_action(c)
        out -= g * (qc - q_mean[:, None, None] * c)
        return out

    post = None
    if config.renorm_each_step:
        def post(c):
            return c / np.sqrt(np.einsum("bij,bij->b", c.conj(), c).real)[:, None, None]

    c, _, _ = _dopri.integrate(rhs, c0, (0.0, config.t_max), config.dt_initial,
                               config.rel_tol, config.abs_tol, post_step=post,
                               min_dt=1e-12 * config.t_max, norm=_dopri.batch_rms_norm)
    return c / np.sqrt(np.einsum("bij,bij->b", c.conj(), c).real)[:, None, None]
