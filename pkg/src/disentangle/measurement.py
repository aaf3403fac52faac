"""Measurement outcomes, basins of attraction and the rotation-noise model.

The deterministic dynamics send the spin-1/2 Bloch vector to +u_d or -u_d
depending on the hemisphere it starts in. Noise is modelled as a random
rotation of the initial direction by a wrapped-Cauchy distributed angle
about an axis normal to it; the probability of the +1 outcome is then a
spherical integral over the hemisphere ``n . u_d >= 0``.
"""
from __future__ import annotations

import enum
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate as spi

from ._dopri import StiffnessError
from .dynamics import GammaPolicy, SimConfig, integrate, integrate_batch
from .spin import (_spin, bloch_vector, coherent_state, dipolar_hamiltonian,
                   unit, unit_vector)
from .state import ComputationError, PureState, purity_trace

__all__ = [
    "Outcome", "WrappedCauchy", "SphereGrid", "Setup", "BasinMap", "NoisePoint",
    "classify_outcome", "basin_map", "wrapped_cauchy_pdf", "p_plus", "p_plus_sphere",
    "p_plus_monte_carlo", "born_rule", "step_rule", "noise_curve",
]


class Outcome(enum.IntEnum):
    MINUS = -1
    UNRESOLVED = 0
    PLUS = 1


# ---------------------------------------------------------------- outcomes

def _label(purity, k_dot_u, eps):
    if purity > 1 - eps:
        if k_dot_u > 1 - eps:
            return Outcome.PLUS
        if k_dot_u < -(1 - eps):
            return Outcome.MINUS
    return Outcome.UNRESOLVED


def classify_outcome(traj, u_d, eps: float = 0.01) -> Outcome:
    """Label the end point of a trajectory as +1, -1 or unresolved."""
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 0.5)")
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    u = unit_vector(u_d)
    return _label(traj.purity[-1], float(np.dot(traj.k[-1], u)), eps)


@dataclass(frozen=True)
class SphereGrid:
    """Cell-centred ``n_theta x n_phi`` lattice of directions.

    ``theta_i = (i + 1/2) pi / n_theta`` and ``phi_j = 2 pi j / n_phi``;
    points are ordered row-major (theta outer). The poles are never grid
    points, so each row has exactly ``n_phi`` entries.
    """

    n_theta: int
    n_phi: int

    def __post_init__(self):
        if self.n_theta < 1 or self.n_phi < 1:
            raise ValueError("grid resolution must be positive")

    @property
    def theta(self) -> np.ndarray:
        return (np.arange(self.n_theta) + 0.5) * np.pi / self.n_theta

    @property
    def phi(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_phi) / self.n_phi

    def angles(self):
        th, ph = np.meshgrid(self.theta, self.phi, indexing="ij")
        return th.ravel(), ph.ravel()

    def points(self) -> np.ndarray:
        th, ph = self.angles()
        return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=1)

    def __len__(self):
        return self.n_theta * self.n_phi


@dataclass(frozen=True)
class Setup:
    """Two-spin dipolar measurement setup (defaults follow the tilted-axis case)."""

    two_s1: int = 1
    two_s2: int = 21
    gamma: float = 1.0
    omega_d: float = 1.0
    u_d: tuple = tuple(unit(3 * np.pi / 8, 3 * np.pi / 4))
    n2: tuple = (0.0, 0.0, -1.0)
    gamma_mode: str = "constant"
    sim: SimConfig = field(default_factory=SimConfig)

    def __post_init__(self):
        object.__setattr__(self, "u_d", tuple(map(float, unit_vector(self.u_d))))
        object.__setattr__(self, "n2", tuple(map(float, unit_vector(self.n2))))
        if self.gamma_mode not in ("constant", "coupling"):
            raise ValueError("gamma_mode must be 'constant' or 'coupling'")
        if self.two_s1 != 1:
            raise ValueError("outcome classification needs a spin-1/2 first subsystem")

    def hamiltonian(self):
        return dipolar_hamiltonian(_spin(f"{self.two_s1}/2"), _spin(f"{self.two_s2}/2"),
                                   self.omega_d, self.u_d)

    def policy(self) -> GammaPolicy:
        if self.gamma_mode == "coupling":
            return GammaPolicy.coupling_driven(self.hamiltonian())
        return GammaPolicy.constant(self.gamma)

    def initial_state(self, n1) -> PureState:
        chi1 = coherent_state(_spin(f"{self.two_s1}/2"), n1)
        chi2 = coherent_state(_spin(f"{self.two_s2}/2"), self.n2)
        return PureState(np.outer(chi1, chi2))

    def snapshot(self) -> dict:
        d = asdict(self)
        d["sim"] = asdict(self.sim)
        return d


@dataclass
class BasinMap:
    grid: SphereGrid
    labels: np.ndarray
    setup: Setup
    eps: float
    n_failed: int = 0

    def __post_init__(self):
        if len(self.labels) != len(self.grid):
            raise ValueError("labels length must match the grid")

    def alignment(self) -> np.ndarray:
        """``n1 . u_d`` at every grid point."""
        return self.grid.points() @ np.asarray(self.setup.u_d)


BASIN_CHUNK = 256


def _basin_chunk(args):
    setup, points, eps = args
    h = setup.hamiltonian()
    policy = setup.policy()
    c0 = np.array([setup.initial_state(n).c for n in points])
    u = np.asarray(setup.u_d)
    labels = np.zeros(len(points), dtype=int)
    failed = 0
    try:
        finals = integrate_batch(c0, h, policy, setup.sim)
    except StiffnessError:
        finals = None
    for i in range(len(points)):
        if finals is None:
            try:
                c = integrate(PureState(c0[i]), h, policy, setup.sim).final_state.c
            except StiffnessError:
                failed += 1
                continue
        else:
            c = finals[i]
        labels[i] = _label(purity_trace(c), float(bloch_vector(c) @ u), eps)
    return labels, failed


def basin_map(grid: SphereGrid, setup: Setup | None = None, eps: float = 0.01,
              threads: int | None = None) -> BasinMap:
    """Integrate from every grid direction and label the outcomes.

    Grid points are processed in fixed chunks of ``BASIN_CHUNK`` whose
    composition does not depend on ``threads``, so results are identical
    for any degree of parallelism.
    """
    if setup is None:
        setup = Setup()
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 0.5)")
    pts = grid.points()
    jobs = [(setup, pts[i:i + BASIN_CHUNK], eps) for i in range(0, len(pts), BASIN_CHUNK)]
    threads = threads or os.cpu_count() or 1
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as ex:
            results = list(ex.map(_basin_chunk, jobs))
    else:
        results = [_basin_chunk(j) for j in jobs]
    labels = np.concatenate([r[0] for r in results]) if results else np.zeros(0, int)
    return BasinMap(grid=grid, labels=labels, setup=setup, eps=eps,
                    n_failed=sum(r[1] for r in results))


# ------------------------------------------------------------------- noise

@dataclass(frozen=True)
class WrappedCauchy:
    phi0: float

    def __post_init__(self):
        if not self.phi0 > 0:
            raise ValueError("phi0 must be positive")

    def pdf(self, phi):
        return wrapped_cauchy_pdf(phi, self)

    def abs_cdf(self, theta):
        """``P(|phi_r| <= theta)`` for ``theta`` in ``[0, pi]``."""
        return 2 / np.pi * np.arctan(np.tan(np.asarray(theta) / 2) / np.tanh(self.phi0 / 2))

    def abs_ppf(self, u):
        """Inverse of :meth:`abs_cdf`."""
        return 2 * np.arctan(np.tanh(self.phi0 / 2) * np.tan(np.pi * np.asarray(u) / 2))

    def sample(self, rng, size):
        """Signed rotation angles in ``(-pi, pi]`` by inverse-CDF sampling."""
        u = rng.random(size)
        return 2 * np.arctan(np.tanh(self.phi0 / 2) * np.tan(np.pi * (u - 0.5)))


def wrapped_cauchy_pdf(phi_r, dist: WrappedCauchy):
    """``sinh(phi0) / (2 pi (cosh(phi0) - cos(phi_r)))``."""
    phi0 = dist.phi0
    # cosh(a) - cos(b) written without cancellation for small phi0
    den = 2 * np.sinh(phi0 / 2) ** 2 + 2 * np.sin(np.asarray(phi_r) / 2) ** 2
    return np.sinh(phi0) / (2 * np.pi * den)


def _upper_fraction(theta_r, theta1):
    """Fraction of the circle at angle ``theta_r`` around a direction of polar
    angle ``theta1`` that lies in ``z >= 0``."""
    x = -np.cos(theta_r) * np.cos(theta1)
    y = np.sin(theta_r) * np.sin(theta1)
    if y <= 1e-300:
        return 1.0 if x <= 0 else 0.0
    return float(np.arccos(np.clip(x / y, -1.0, 1.0)) / np.pi)


def _kinks(theta1):
    a = abs(np.pi / 2 - theta1)
    return sorted({a, np.pi - a} - {0.0, np.pi})


def p_plus(theta1: float, dist: WrappedCauchy, tol: float = 1e-4) -> float:
    """Probability of the +1 outcome for a noisy initial direction.

    Evaluated as a 1-D integral over the noise angle, after substituting the
    folded CDF ``u = P(|phi_r| <= theta)`` so the integrand is bounded:

        p+ = integral_0^1 F(theta(u)) du

    where ``F`` is the fraction of the azimuthal circle at that angle lying in
    the upper hemisphere.

    Raises
    ------
    ComputationError
        If the quadrature error estimate exceeds ``tol``.
    """
    if not 0 <= theta1 <= np.pi:
        raise ValueError("theta1 must lie in [0, pi]")
    pts = [float(dist.abs_cdf(k)) for k in _kinks(theta1)]
    pts = [p for p in pts if 0 < p < 1]
    val, err = spi.quad(lambda u: _upper_fraction(dist.abs_ppf(u), theta1), 0.0, 1.0,
                        points=pts or None, limit=400, epsabs=1e-12, epsrel=1e-12)
    if err > tol:
        raise ComputationError(f"p_plus quadrature error estimate {err:.2e} > {tol}")
    return float(np.clip(val, 0.0, 1.0))


def p_plus_sphere(theta1: float, dist: WrappedCauchy, cap: float = 1e-4,
                  tol: float = 1e-7):
    """Direct hemisphere quadrature of the noise density ``f / (pi sin)``.

    Integrates over ``theta' in [0, pi/2]``, ``phi' in [0, 2 pi)`` with the
    singular point removed by a cap of angular radius ``cap``; the cap's
    probability mass is known in closed form and added back according to
    which side of the equator it sits. Returns ``(value, bound)`` where
    ``bound`` covers the cap treatment when the cap straddles the equator.
    """
    s1, c1 = np.sin(theta1), np.cos(theta1)
    cos_cap = np.cos(cap)

    def inner(tp):
        st, ct = np.sin(tp), np.cos(tp)
        if s1 < 1e-12 or st < 1e-300:
            # integrand constant in phi'
            tr = np.arccos(np.clip(ct * c1 + st * s1, -1, 1))
            if tr < cap:
                return 0.0
            return 2 * wrapped_cauchy_pdf(tr, dist) / np.sin(tr) * st
        x = (cos_cap - ct * c1) / (st * s1)
        if x <= -1:
            return 0.0
        lo = 0.0 if x >= 1 else float(np.arccos(x))

        # phi' = (w / s1) sinh(v) spreads the peak near the singular point,
        # whose width in phi' is about |theta' - theta1| / sin(theta1)
        w = max(abs(tp - theta1), cap)
        sc = w / max(s1, 1e-300)

        def g(v):
            pp = sc * np.sinh(v)
            cr = np.clip(ct * c1 + st * s1 * np.cos(pp), -1.0, 1.0)
            sr = np.sqrt(max(1.0 - cr * cr, 1e-300))
            return wrapped_cauchy_pdf(np.arccos(cr), dist) / (np.pi * sr) * sc * np.cosh(v)

        v, _ = spi.quad(g, np.arcsinh(lo / sc), np.arcsinh(np.pi / sc), limit=200,
                        epsabs=tol * 1e-2, epsrel=tol * 1e-2)
        return 2 * v * st  # symmetric in phi'

    brk = [b for b in (theta1 - cap, theta1, theta1 + cap) if 0 < b < np.pi / 2]
    val, _ = spi.quad(inner, 0.0, np.pi / 2, points=brk or None, limit=400,
                      epsabs=tol, epsrel=tol)
    cap_mass = float(dist.abs_cdf(cap))
    bound = 0.0
    if theta1 + cap <= np.pi / 2:
        val += cap_mass
    elif theta1 - cap < np.pi / 2:
        val += cap_mass / 2
        bound = cap_mass / 2
    return float(np.clip(val, 0.0, 1.0)), bound


def p_plus_monte_carlo(theta1: float, dist: WrappedCauchy, n_samples: int = 10**7,
                       seed: int = 0, chunk: int = 10**6):
    """Monte-Carlo estimate of ``p+``: rotate the initial direction about a
    uniformly random normal axis by a sampled angle and count landings in
    the upper hemisphere. Returns ``(p, standard_error)``."""
    rng = np.random.default_rng(seed)
    s1, c1 = np.sin(theta1), np.cos(theta1)
    hits = 0
    done = 0
    while done < n_samples:
        n = min(chunk, n_samples - done)
        phi = dist.sample(rng, n)
        beta = rng.uniform(0.0, 2 * np.pi, n)
        z = np.cos(phi) * c1 + np.sin(phi) * s1 * np.cos(beta)
        hits += int(np.count_nonzero(z >= 0))
        done += n
    p = hits / n_samples
    return p, float(np.sqrt(max(p * (1 - p), 0.0) / n_samples))


def born_rule(theta1):
    return np.cos(np.asarray(theta1) / 2) ** 2


def step_rule(theta1):
    """Noiseless outcome probability; 1/2 on the boundary by convention."""
    th = np.asarray(theta1, dtype=float)
    out = np.where(th < np.pi / 2, 1.0, 0.0)
    return np.where(np.abs(th - np.pi / 2) < 1e-12, 0.5, out)


class NoisePoint(NamedTuple):
    theta1: float
    p_plus: float
    born: float
    step: float


def noise_curve(dist: WrappedCauchy, thetas) -> list[NoisePoint]:
    """Tabulate the noisy, Born and noiseless outcome probabilities."""
    return [NoisePoint(float(t), p_plus(float(t), dist), float(born_rule(t)),
                       float(step_rule(t))) for t in thetas]
