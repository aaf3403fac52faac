"""Bipartite pure states stored as coefficient matrices.

A state of two subsystems with dimensions ``n1`` and ``n2`` is held as the
``n1 x n2`` complex matrix ``C``; the composite basis index of ``C[k1, k2]``
is ``k1 * n2 + k2`` (row-major), which matches ``np.kron`` ordering.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NORM_TOL = 1e-9
MAX_DIM = 4096


class ComputationError(RuntimeError):
    """A numerical routine failed to produce a trustworthy result."""


@dataclass(frozen=True)
class BipartiteShape:
    n1: int
    n2: int
    max_dim: int = field(default=MAX_DIM, compare=False, repr=False)

    def __post_init__(self):
        if int(self.n1) != self.n1 or int(self.n2) != self.n2:
            raise ValueError("subsystem dimensions must be integers")
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError(f"subsystem dimensions must be >= 1, got {self.n1}x{self.n2}")
        if self.n1 * self.n2 > self.max_dim:
            raise ValueError(
                f"total dimension {self.n1 * self.n2} exceeds cap {self.max_dim}")

    @property
    def dim(self) -> int:
        return self.n1 * self.n2

    @property
    def m(self) -> int:
        """Number of Schmidt coefficients, ``min(n1, n2)``."""
        return min(self.n1, self.n2)


class PureState:
    """Normalized bipartite pure state.

    Parameters
    ----------
    c : array_like, shape (n1, n2)
        Coefficient matrix. Must have unit Frobenius norm within ``NORM_TOL``;
        use :meth:`renormalized` or :func:`normalize` to fix drift explicitly.
    max_dim : int
        Cap on ``n1 * n2``.
    """

    __slots__ = ("_c", "shape")

    def __init__(self, c, max_dim: int = MAX_DIM):
        c = np.array(c, dtype=complex)
        if c.ndim != 2:
            raise ValueError(f"coefficient matrix must be 2-D, got ndim={c.ndim}")
        self.shape = BipartiteShape(*c.shape, max_dim=max_dim)
        norm2 = float(np.vdot(c, c).real)
        if abs(norm2 - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized: |psi|^2 = {norm2!r}")
        c.setflags(write=False)
        self._c = c

    @property
    def c(self) -> np.ndarray:
        return self._c

    @property
    def vector(self) -> np.ndarray:
        """State as a flat vector in the composite basis."""
        return self._c.ravel()

    @classmethod
    def from_vector(cls, v, n1: int, n2: int) -> "PureState":
        return cls(np.asarray(v, dtype=complex).reshape(n1, n2))

    def renormalized(self) -> "PureState":
        return PureState(normalize(self._c))

    def __repr__(self):
        return f"PureState(n1={self.shape.n1}, n2={self.shape.n2})"


@dataclass(frozen=True)
class SchmidtSpectrum:
    """Schmidt coefficients sorted in descending order."""

    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if np.any(q < 0):
            raise ValueError("Schmidt coefficients must be non-negative")
        if abs(np.sum(q**2) - 1.0) > NORM_TOL:
            raise ValueError("Schmidt coefficients must satisfy sum(q**2) = 1")
        if np.any(np.diff(q) > 0):
            raise ValueError("Schmidt coefficients must be sorted descending")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)


@dataclass(frozen=True)
class EntanglementReport:
    purity: float
    q_expectation: float
    entropy: float


def normalize(c) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    nrm = np.linalg.norm(c)
    if nrm == 0:
        raise ValueError("cannot normalize a zero vector")
    return c / nrm


def _as_matrix(psi) -> np.ndarray:
    if isinstance(psi, PureState):
        return psi.c
    c = np.asarray(psi, dtype=complex)
    if c.ndim != 2:
        raise ValueError("expected a PureState or a 2-D coefficient matrix")
    return c


def _check_normalized(c):
    norm2 = float(np.vdot(c, c).real)
    if abs(norm2 - 1.0) > NORM_TOL:
        raise ValueError(f"state is not normalized: |psi|^2 = {norm2!r}")


def product_state(v1, v2) -> PureState:
    """Return the product state ``v1 (x) v2`` as a coefficient matrix."""
    v1 = np.asarray(v1, dtype=complex).ravel()
    v2 = np.asarray(v2, dtype=complex).ravel()
    for name, v in (("v1", v1), ("v2", v2)):
        n = np.linalg.norm(v)
        if n == 0:
            raise ValueError(f"{name} has zero norm")
        if abs(n - 1.0) > NORM_TOL:
            raise ValueError(f"{name} is not normalized (norm {n!r})")
    return PureState(np.outer(v1, v2))


def schmidt(psi) -> SchmidtSpectrum:
    """Schmidt coefficients of ``psi`` from the singular values of ``C``."""
    c = _as_matrix(psi)
    try:
        q = np.linalg.svd(c, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise ComputationError(f"SVD failed: {exc}") from exc
    # numpy returns singular values already sorted descending
    return SchmidtSpectrum(q)


def _minor_index_pairs(n1, n2):
    """Index arrays over all (k1' < k1'', k2' < k2'') quadruples."""
    i1, j1 = np.triu_indices(n1, k=1)
    i2, j2 = np.triu_indices(n2, k=1)
    a1 = np.repeat(i1, len(i2))
    b1 = np.repeat(j1, len(i2))
    a2 = np.tile(i2, len(i1))
    b2 = np.tile(j2, len(i1))
    return a1, b1, a2, b2


def minors(c) -> np.ndarray:
    """All 2x2 minors ``C[k1',k2'] C[k1'',k2''] - C[k1',k2''] C[k1'',k2']``
    with ``k1' < k1''`` and ``k2' < k2''``, flattened."""
    c = _as_matrix(c)
    a1, b1, a2, b2 = _minor_index_pairs(*c.shape)
    return c[a1, a2] * c[b1, b2] - c[a1, b2] * c[b1, a2]


def purity(psi) -> float:
    """Purity ``P = 1 - 2 * sum |phi|^2`` over the 2x2 minors of ``C``."""
    c = _as_matrix(psi)
    _check_normalized(c)
    phi = minors(c)
    return float(1.0 - 2.0 * np.sum(np.abs(phi) ** 2))


def purity_trace(psi) -> float:
    """Purity as ``Tr((C^dag C)^2)``; independent of the minor expansion."""
    c = _as_matrix(psi)
    s2 = c.conj().T @ c
    return float(np.real(np.sum(s2 * s2.T)))


def apply_q(psi) -> np.ndarray:
    """Coefficients of ``Q|psi>`` accumulated term by term from the minors.

    Each minor ``phi`` over corners a=(k1',k2'), b=(k1',k2''),
    c=(k1'',k2'), d=(k1'',k2'') contributes ``phi * conj(C_d)`` at a,
    ``phi * conj(C_a)`` at d, ``-phi * conj(C_c)`` at b and
    ``-phi * conj(C_b)`` at c.
    """
    c = _as_matrix(psi)
    a1, b1, a2, b2 = _minor_index_pairs(*c.shape)
    ca, cb, cc, cd = c[a1, a2], c[a1, b2], c[b1, a2], c[b1, b2]
    phi = ca * cd - cb * cc
    out = np.zeros_like(c)
    np.add.at(out, (a1, a2), phi * cd.conj())
    np.add.at(out, (b1, b2), phi * ca.conj())
    np.add.at(out, (a1, b2), -phi * cc.conj())
    np.add.at(out, (b1, a2), -phi * cb.conj())
    return out


def q_action(c: np.ndarray) -> np.ndarray:
    """``Q|psi>`` via the identity ``Tr(C^dag C) C - C C^dag C``.

    Same operator as :func:`apply_q`, O(n^3) instead of O(n^4); this is the
    form used inside the integrators.
    """
    norm2 = np.vdot(c, c).real
    return norm2 * c - c @ (c.conj().T @ c)


def dense_q(psi) -> np.ndarray:
    """Explicit ``(n1 n2) x (n1 n2)`` matrix of Q as half a sum of projectors
    ``|Psi><Psi|``, with ``<Psi| = C_d<a| + C_a<d| - C_c<b| - C_b<c|``."""
    c = _as_matrix(psi)
    n1, n2 = c.shape
    dim = n1 * n2
    a1, b1, a2, b2 = _minor_index_pairs(n1, n2)
    kets = np.zeros((len(a1), dim), dtype=complex)
    rows = np.arange(len(a1))
    ia, ib = a1 * n2 + a2, a1 * n2 + b2
    ic, id_ = b1 * n2 + a2, b1 * n2 + b2
    # |Psi> holds the conjugated bra coefficients
    kets[rows, ia] += c[b1, b2].conj()
    kets[rows, id_] += c[a1, a2].conj()
    kets[rows, ib] -= c[b1, a2].conj()
    kets[rows, ic] -= c[a1, b2].conj()
    return 0.5 * kets.T @ kets.conj()


def q_expectation(psi) -> float:
    """``<Q> = 1 - P``."""
    return 1.0 - purity(psi)


def entanglement_entropy(spectrum) -> float:
    """Von Neumann entropy (natural log) of a Schmidt spectrum."""
    q = spectrum.q if isinstance(spectrum, SchmidtSpectrum) else np.asarray(spectrum, float)
    p = q**2
    p = p[p > 0]
    return float(max(-np.sum(p * np.log(p)), 0.0)) + 0.0  # no -0.0


def entanglement_report(psi) -> EntanglementReport:
    p = purity(psi)
    return EntanglementReport(purity=p, q_expectation=1.0 - p,
                              entropy=entanglement_entropy(schmidt(psi)))


def random_state(n1: int, n2: int, rng=None) -> PureState:
    """Haar-random pure state (Gaussian coefficients, normalized)."""
    rng = np.random.default_rng(rng)
    c = rng.normal(size=(n1, n2)) + 1j * rng.normal(size=(n1, n2))
    return PureState(normalize(c))


def random_unitary(n: int, rng=None) -> np.ndarray:
    rng = np.random.default_rng(rng)
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))
