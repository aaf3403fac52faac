"""Property suite run by ``sim validate``.

Each check returns a :class:`Check` with the measured residual and the
tolerance it was held to. Sizes are chosen to finish in about a minute on a
single core.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from . import dynamics, flow, measurement, spin, state
from .dynamics import GammaPolicy, SimConfig


@dataclass
class Check:
    name: str
    module: str
    passed: bool
    residual: float
    tolerance: float
    seconds: float = 0.0
    detail: str = ""


def _rng(seed):
    return np.random.default_rng(seed)


TILTED_AXIS = spin.unit(3 * np.pi / 8, 3 * np.pi / 4)
COLLAPSE_CASES = {
    1: ((0.55 * np.pi, 0.45 * np.pi), (1.0, 0.0, 0.0)),
    2: ((0.55 * np.pi, 0.55 * np.pi), (1.0, 0.0, 0.0)),
    3: ((0.55 * np.pi, 0.75 * np.pi), (1.0, 0.0, 0.0)),
    4: ((0.50 * np.pi, 0.50 * np.pi), tuple(TILTED_AXIS)),
}


def collapse_setup(case: int, **sim):
    """Initial state and Hamiltonian of one of the four dipolar-measurement cases."""
    (th, ph), u_d = COLLAPSE_CASES[case]
    setup = measurement.Setup(u_d=u_d, sim=SimConfig(**sim))
    n1 = spin.unit(th, ph)
    return setup.initial_state(n1), setup.hamiltonian(), n1, np.asarray(u_d)


# ------------------------------------------------------------- state core

def check_q_consistency(seed=1, per_shape=50):
    rng = _rng(seed)
    worst = 0.0
    for shape in [(2, 2), (3, 4), (6, 8), (5, 3)]:
        for _ in range(per_shape):
            psi = state.random_state(*shape, rng)
            qv = np.vdot(psi.c, state.apply_q(psi))
            worst = max(worst, abs((1 - state.purity(psi)) - qv.real))
    return worst, 1e-10


def check_local_unitary_invariance(seed=2, n=50):
    rng = _rng(seed)
    worst = 0.0
    for _ in range(n):
        n1, n2 = rng.integers(1, 7), rng.integers(1, 9)
        psi = state.random_state(n1, n2, rng)
        u1, u2 = state.random_unitary(n1, rng), state.random_unitary(n2, rng)
        c2 = u1.T @ psi.c @ u2
        worst = max(worst, abs(state.purity(c2) - state.purity(psi)))
    return worst, 1e-10


def check_p1_equals_p2(seed=3, n=50):
    rng = _rng(seed)
    worst = 0.0
    for _ in range(n):
        c = state.random_state(rng.integers(1, 7), rng.integers(1, 9), rng).c
        s1 = c @ c.conj().T
        s2 = c.conj().T @ c
        worst = max(worst, abs(np.trace(s1 @ s1) - np.trace(s2 @ s2)))
    return worst, 1e-10


def check_two_qubit_bound(seed=4, n=10_000):
    rng = _rng(seed)
    c = rng.normal(size=(n, 2, 2)) + 1j * rng.normal(size=(n, 2, 2))
    c /= np.linalg.norm(c.reshape(n, -1), axis=1)[:, None, None]
    q = 2 * np.abs(c[:, 0, 0] * c[:, 1, 1] - c[:, 0, 1] * c[:, 1, 0]) ** 2
    return max(float(q.max()) - 0.5, 0.0), 1e-12


def check_q_expectation_real(seed=5, n=50):
    rng = _rng(seed)
    worst = 0.0
    for _ in range(n):
        psi = state.random_state(rng.integers(2, 7), rng.integers(2, 9), rng)
        worst = max(worst, abs(np.vdot(psi.c, state.apply_q(psi)).imag))
    return worst, 1e-12


def check_dense_q_hermitian(seed=6, n=20):
    rng = _rng(seed)
    worst = 0.0
    for _ in range(n):
        q = state.dense_q(state.random_state(rng.integers(2, 5), rng.integers(2, 6), rng))
        worst = max(worst, float(np.max(np.abs(q - q.conj().T))))
    return worst, 1e-12


# -------------------------------------------------------------------- spin

def check_spin_algebra():
    worst = 0.0
    for two_s in range(1, 22):
        sx, sy, sz = spin.spin_matrices(spin.SpinQuantumNumber(two_s))
        s = two_s / 2
        eye = np.eye(two_s + 1)
        for a, b, c in ((sx, sy, sz), (sy, sz, sx), (sz, sx, sy)):
            worst = max(worst, np.max(np.abs(a @ b - b @ a - 1j * c)))
        worst = max(worst, np.max(np.abs(sx @ sx + sy @ sy + sz @ sz - s * (s + 1) * eye)))
        for m in (sx, sy, sz):
            worst = max(worst, np.max(np.abs(m - m.conj().T)))
    return float(worst), 1e-10


def check_coherent_eigen(seed=7, n=30):
    rng = _rng(seed)
    worst = 0.0
    for _ in range(n):
        two_s = int(rng.integers(1, 22))
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        s = spin.SpinQuantumNumber(two_s)
        chi = spin.coherent_state(s, v)
        r = spin.spin_matrices(s).dot(v) @ chi - s.s * chi
        worst = max(worst, float(np.linalg.norm(r)))
    return worst, 1e-10


def check_bloch_unit_on_products(seed=8, n=50):
    rng = _rng(seed)
    worst = 0.0
    for _ in range(n):
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        w = rng.normal(size=5) + 1j * rng.normal(size=5)
        psi = state.product_state(spin.coherent_state("1/2", v), w / np.linalg.norm(w))
        worst = max(worst, abs(np.linalg.norm(spin.bloch_vector(psi)) - 1))
    return float(worst), 1e-8


def check_dipolar_spectrum(seed=9, n=10):
    rng = _rng(seed)
    ref = np.linalg.eigvalsh(spin.dipolar_hamiltonian("1/2", "21/2", 1.0, [0, 0, 1]).matrix)
    worst = 0.0
    for _ in range(n):
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        w = np.linalg.eigvalsh(spin.dipolar_hamiltonian("1/2", "21/2", 1.0, v).matrix)
        worst = max(worst, float(np.max(np.abs(w - ref))))
    return worst, 1e-9


# ---------------------------------------------------------------- dynamics

def check_norm_conservation(t_max=20.0):
    worst = 0.0
    for case in COLLAPSE_CASES:
        psi, h, _, _ = collapse_setup(case)
        cfg = SimConfig(t_max=t_max, rel_tol=1e-10, abs_tol=1e-12, renorm_each_step=False)
        tr = dynamics.integrate(psi, h, GammaPolicy.constant(1.0), cfg)
        worst = max(worst, float(tr.norm_error.max()))
    return worst, 1e-7


def check_purity_monotone_h0(seed=10, n=6):
    rng = _rng(seed)
    worst = 0.0
    for _ in range(n):
        n1, n2 = int(rng.integers(2, 7)), int(rng.integers(2, 9))
        psi = state.random_state(n1, n2, rng)
        h = np.zeros((n1 * n2, n1 * n2))
        tr = dynamics.integrate(psi, h, GammaPolicy.constant(1.0),
                                SimConfig(t_max=10.0, rel_tol=1e-10, abs_tol=1e-12))
        worst = max(worst, float(max(-np.diff(tr.purity).min(), 0.0)))
    return worst, 1e-9


def check_gamma_zero_equivalence():
    worst = 0.0
    for case in (1, 4):
        psi, h, _, _ = collapse_setup(case)
        tr = dynamics.integrate(psi, h, GammaPolicy.constant(0.0),
                                SimConfig(t_max=1.0, rel_tol=1e-11, abs_tol=1e-13))
        ref = dynamics.unitary_evolve(psi, h, 1.0)
        fid = abs(np.vdot(ref.c, tr.final_state.c)) ** 2
        worst = max(worst, 1 - fid)
    return float(worst), 1e-8


def check_product_transparency(seed=11):
    rng = _rng(seed)
    worst = 0.0
    for n1, n2 in ((2, 3), (3, 4)):
        a = rng.normal(size=(n1, n1)) + 1j * rng.normal(size=(n1, n1))
        b = rng.normal(size=(n2, n2)) + 1j * rng.normal(size=(n2, n2))
        a, b = a + a.conj().T, b + b.conj().T
        h = np.kron(a, np.eye(n2)) + np.kron(np.eye(n1), b)
        v1 = rng.normal(size=n1) + 1j * rng.normal(size=n1)
        v2 = rng.normal(size=n2) + 1j * rng.normal(size=n2)
        psi = state.product_state(v1 / np.linalg.norm(v1), v2 / np.linalg.norm(v2))
        tr = dynamics.integrate(psi, h, GammaPolicy.constant(2.5),
                                SimConfig(t_max=5.0, rel_tol=1e-10, abs_tol=1e-12))
        worst = max(worst, float(1 - tr.purity.min()))
    return worst, 1e-8


def check_long_time_collapse():
    worst = 0.0
    for case in (1, 2, 3):
        psi, h, n1, u = collapse_setup(case)
        tr = dynamics.integrate(psi, h, GammaPolicy.constant(1.0), SimConfig(t_max=30.0))
        ku = float(tr.k[-1] @ u)
        ok_sign = np.sign(ku) == np.sign(n1 @ u)
        miss = max(0.99 - tr.purity[-1], 0.99 - abs(ku), 0.0)
        worst = max(worst, miss if ok_sign else 1.0)
    return worst, 0.0


# ------------------------------------------------------------ schmidt flow

def _flow_runs(seed=12):
    rng = _rng(seed)
    runs = [flow.integrate_flow(flow.FlowState(flow.perturbed_uniform(10), 1.0), 40.0)]
    for m in (2, 3, 4, 6, 10):
        q = rng.random(m)
        runs.append(flow.integrate_flow(flow.FlowState(q / np.linalg.norm(q), 1.0), 20.0))
    return runs


def check_flow_ratio_monotone():
    worst = 0.0
    for tr in _flow_runs():
        q = tr.q
        order = np.argsort(-q[0])
        for a, b in zip(order[:-1], order[1:]):
            if q[0, b] <= 0:
                continue
            r = q[:, a] / q[:, b]
            worst = max(worst, float(max(-np.diff(r).min() / r[0], 0.0)))
    return worst, 1e-12


def check_flow_purity_monotone():
    return max(float(max(-np.diff(tr.l4).min(), 0.0)) for tr in _flow_runs()), 1e-12


def check_flow_norm():
    return max(float(np.abs(tr.l2 - 1).max()) for tr in _flow_runs()), 1e-8


def check_flow_entropy_monotone():
    return max(float(max(np.diff(tr.entropy).max(), 0.0)) for tr in _flow_runs()), 1e-12


def check_flow_equilibria():
    worst = 0.0
    for m in (2, 3, 5, 10):
        for support in range(1, m + 1):
            q = np.zeros(m)
            q[:support] = support ** -0.5
            worst = max(worst, float(np.max(np.abs(flow.flow_rhs(flow.FlowState(q, 1.0))))))
    return worst, 1e-12


# ------------------------------------------------------------- measurement

def check_p_plus_monotone():
    d = measurement.WrappedCauchy(0.5)
    p = np.array([measurement.p_plus(t, d) for t in np.linspace(0, np.pi, 181)])
    return float(max(np.diff(p).max(), 0.0)), 1e-6


def check_p_plus_complementarity():
    d = measurement.WrappedCauchy(0.5)
    th = np.linspace(0, np.pi, 181)
    p = np.array([measurement.p_plus(t, d) for t in th])
    return float(np.max(np.abs(p + p[::-1] - 1))), 1e-6


def check_p_plus_routes(seed=13):
    d = measurement.WrappedCauchy(0.5)
    worst = 0.0
    for i, th in enumerate((0.4, 1.2, 2.3)):
        a = measurement.p_plus(th, d)
        b, _ = measurement.p_plus_sphere(th, d)
        c, _ = measurement.p_plus_monte_carlo(th, d, 10**7, seed=seed + i)
        worst = max(worst, abs(a - b), abs(a - c), abs(b - c))
    return worst, 1e-3


def check_noise_normalization():
    from scipy import integrate as spi

    worst = 0.0
    for phi0 in (0.05, 0.5, 2.0):
        d = measurement.WrappedCauchy(phi0)
        # density f / (pi sin) over the sphere, in coordinates centred on the noise axis
        v, _ = spi.quad(lambda t: 2 * np.pi * d.pdf(t) / np.pi, 0, np.pi,
                        points=[phi0], epsabs=1e-13, epsrel=1e-13)
        worst = max(worst, abs(v - 1))
    return worst, 1e-8


def check_basin_refinement(n_theta=6, n_phi=12):
    setup = measurement.Setup(sim=SimConfig(rel_tol=1e-8, abs_tol=1e-10))
    coarse = measurement.basin_map(measurement.SphereGrid(n_theta, n_phi), setup, threads=1)
    fine = measurement.basin_map(measurement.SphereGrid(2 * n_theta, 2 * n_phi), setup, threads=1)
    u = np.asarray(setup.u_d)
    cl = coarse.labels.reshape(n_theta, n_phi)
    fl = fine.labels.reshape(2 * n_theta, 2 * n_phi)
    ca = (coarse.grid.points() @ u).reshape(n_theta, n_phi)
    fa = (fine.grid.points() @ u).reshape(2 * n_theta, 2 * n_phi)
    changed = 0
    for i in range(2 * n_theta):
        for j in range(2 * n_phi):
            # coarse cell containing the fine point (phi cells centred on their nodes)
            ci, cj = i // 2, ((j + 1) // 2) % n_phi
            # cells cut by the basin boundary are skipped: the coarse centre
            # and the fine point may sit on opposite sides of it
            same_side = fa[i, j] * ca[ci, cj] > 0
            if same_side and min(abs(fa[i, j]), abs(ca[ci, cj])) > 0.05 \
                    and fl[i, j] != cl[ci, cj]:
                changed += 1
    return float(changed), 0.0


CHECKS = [
    ("state", "q_consistency", check_q_consistency),
    ("state", "local_unitary_invariance", check_local_unitary_invariance),
    ("state", "p1_equals_p2", check_p1_equals_p2),
    ("state", "two_qubit_bound", check_two_qubit_bound),
    ("state", "q_expectation_real", check_q_expectation_real),
    ("state", "dense_q_hermitian", check_dense_q_hermitian),
    ("spin", "spin_algebra", check_spin_algebra),
    ("spin", "coherent_eigenvector", check_coherent_eigen),
    ("spin", "bloch_unit_on_products", check_bloch_unit_on_products),
    ("spin", "dipolar_spectrum_axis_independent", check_dipolar_spectrum),
    ("dynamics", "norm_conservation", check_norm_conservation),
    ("dynamics", "purity_monotone_h0", check_purity_monotone_h0),
    ("dynamics", "gamma_zero_equivalence", check_gamma_zero_equivalence),
    ("dynamics", "product_transparency", check_product_transparency),
    ("dynamics", "long_time_collapse", check_long_time_collapse),
    ("flow", "ratio_monotone", check_flow_ratio_monotone),
    ("flow", "purity_monotone", check_flow_purity_monotone),
    ("flow", "norm_invariance", check_flow_norm),
    ("flow", "entropy_monotone", check_flow_entropy_monotone),
    ("flow", "equilibria", check_flow_equilibria),
    ("measurement", "p_plus_monotone", check_p_plus_monotone),
    ("measurement", "p_plus_complementarity", check_p_plus_complementarity),
    ("measurement", "p_plus_three_routes", check_p_plus_routes),
    ("measurement", "noise_normalization", check_noise_normalization),
    ("measurement", "basin_refinement", check_basin_refinement),
]


def run_checks(names=None, log=None) -> list[Check]:
    out = []
    for module, name, fn in CHECKS:
        if names is not None and name not in names:
            continue
        t0 = time.perf_counter()
        try:
            residual, tol = fn()
            passed = bool(np.isfinite(residual) and residual <= tol)
            detail = ""
        except Exception as exc:  # a crashing check is a failed check
            residual, tol, passed, detail = float("nan"), float("nan"), False, repr(exc)
        chk = Check(name=name, module=module, passed=passed, residual=float(residual),
                    tolerance=float(tol), seconds=time.perf_counter() - t0, detail=detail)
        if log is not None:
            log(chk)
        out.append(chk)
    return out


def report(checks) -> dict:
    return {
        "passed": all(c.passed for c in checks),
        "n_checks": len(checks),
        "n_failed": sum(not c.passed for c in checks),
        "checks": [asdict(c) for c in checks],
    }
