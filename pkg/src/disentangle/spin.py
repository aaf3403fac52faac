"""Angular-momentum matrices, spin coherent states and the dipolar coupling.

Units: hbar = 1, so spin matrices have eigenvalues m in {S, S-1, ..., -S}
and every rate (omega_d, gamma) is an inverse time.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .state import MAX_DIM, ComputationError, PureState, _as_matrix


@dataclass(frozen=True)
class SpinQuantumNumber:
    """Spin S stored as the integer ``two_s = 2S``."""

    two_s: int

    def __post_init__(self):
        if int(self.two_s) != self.two_s or self.two_s < 1:
            raise ValueError(f"two_s must be a positive integer, got {self.two_s!r}")
        object.__setattr__(self, "two_s", int(self.two_s))

    @classmethod
    def from_value(cls, s) -> "SpinQuantumNumber":
        """Build from S given as a number or a string such as ``"21/2"``."""
        two_s = 2 * Fraction(str(s))
        if two_s.denominator != 1:
            raise ValueError(f"spin must be an integer or half-integer, got {s!r}")
        return cls(int(two_s))

    @property
    def s(self) -> float:
        return self.two_s / 2

    @property
    def dim(self) -> int:
        return self.two_s + 1

    def __str__(self):
        return str(self.two_s // 2) if self.two_s % 2 == 0 else f"{self.two_s}/2"


def _spin(s) -> SpinQuantumNumber:
    if isinstance(s, SpinQuantumNumber):
        return s
    return SpinQuantumNumber.from_value(s)


@dataclass(frozen=True)
class SpinOperators:
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray

    def dot(self, u) -> np.ndarray:
        """``S . u`` for a 3-vector ``u``."""
        u = np.asarray(u, dtype=float)
        return u[0] * self.sx + u[1] * self.sy + u[2] * self.sz

    def __iter__(self):
        return iter((self.sx, self.sy, self.sz))


def unit_vector(v) -> np.ndarray:
    """Validate a direction; returns a float array of shape (3,) with unit norm."""
    v = np.asarray(v, dtype=float).reshape(3)
    if abs(np.dot(v, v) - 1.0) > 1e-12:
        raise ValueError(f"not a unit vector: {v}")
    return v


def unit(theta: float, phi: float) -> np.ndarray:
    """Unit vector ``(sin t cos p, sin t sin p, cos t)``."""
    st = np.sin(theta)
    return np.array([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])


def spin_matrices(s, max_dim: int = MAX_DIM) -> SpinOperators:
    """Spin matrices in the basis ``|S, m>`` ordered ``m = S, S-1, ..., -S``."""
    s = _spin(s)
    if s.dim > max_dim:
        raise ValueError(f"spin dimension {s.dim} exceeds cap {max_dim}")
    S = s.s
    m = S - np.arange(s.dim)
    # <m+1|S+|m> sits one row above the diagonal
    sp = np.diag(np.sqrt(S * (S + 1) - m[1:] * (m[1:] + 1)), k=1).astype(complex)
    sm = sp.conj().T
    sx = 0.5 * (sp + sm)
    sy = -0.5j * (sp - sm)
    sz = np.diag(m).astype(complex)
    return SpinOperators(sx, sy, sz)


def coherent_state(s, n) -> np.ndarray:
    """Spin coherent state pointing along ``n``.

    Eigenvector of ``S . n`` with eigenvalue S; the global phase makes the
    first non-negligible component real and positive.
    """
    s = _spin(s)
    n = np.asarray(n, dtype=float)
    ops = spin_matrices(s)
    w, v = np.linalg.eigh(ops.dot(n))
    if s.dim > 1 and w[-1] - w[-2] < 0.5:
        raise ComputationError("top eigenvalue of S.n is degenerate")
    chi = v[:, -1]
    k = np.flatnonzero(np.abs(chi) > 1e-12)[0]
    chi = chi * (abs(chi[k]) / chi[k])
    return chi / np.linalg.norm(chi)


@dataclass(frozen=True)
class DipolarHamiltonian:
    matrix: np.ndarray
    omega_d: float
    u_d: np.ndarray
    a: np.ndarray
    b: np.ndarray

    @property
    def factors(self):
        """``(omega_d * S1.u, S2.u)`` with ``matrix = kron(*factors)``."""
        return self.omega_d * self.a, self.b


def dipolar_hamiltonian(s1, s2, omega_d: float, u_d) -> DipolarHamiltonian:
    """``omega_d (S1 . u_d) (S2 . u_d)`` on the composite space."""
    if not omega_d > 0:
        raise ValueError(f"omega_d must be positive, got {omega_d!r}")
    u_d = unit_vector(u_d)
    a = spin_matrices(s1).dot(u_d)
    b = spin_matrices(s2).dot(u_d)
    return DipolarHamiltonian(omega_d * np.kron(a, b), float(omega_d),
                              np.asarray(u_d), a, b)


def bloch_vector(psi, s1=None) -> np.ndarray:
    """Bloch vector ``k = 2 <S1>`` of a spin-1/2 first subsystem."""
    c = _as_matrix(psi)
    if c.shape[0] != 2 or (s1 is not None and _spin(s1).two_s != 1):
        raise ValueError("bloch_vector needs a spin-1/2 first subsystem (n1 = 2)")
    rho1 = c @ c.conj().T
    # Tr(rho sigma) for the Pauli matrices
    return np.array([2 * rho1[0, 1].real, -2 * rho1[0, 1].imag,
                     (rho1[0, 0] - rho1[1, 1]).real])


def expectation(psi, op) -> float:
    """``<psi| op |psi>`` (real part) for an operator on the composite space."""
    v = psi.vector if isinstance(psi, PureState) else np.asarray(psi).ravel()
    return float(np.vdot(v, op @ v).real)


def local_expectation(psi, op, subsystem: int) -> float:
    """Expectation of ``op`` acting on subsystem 1 or 2 only."""
    c = _as_matrix(psi)
    if subsystem == 1:
        return float(np.real(np.sum(c.conj() * (op @ c))))
    if subsystem == 2:
        return float(np.real(np.sum(c.conj() * (c @ op.T))))
    raise ValueError("subsystem must be 1 or 2")
