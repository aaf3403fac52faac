import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from disentangle import spin, state
from disentangle.spin import SpinQuantumNumber

angles = st.tuples(st.floats(0, np.pi), st.floats(0, 2 * np.pi))


def test_spin_number_parsing():
    s = SpinQuantumNumber.from_value("21/2")
    assert s.two_s == 21 and s.dim == 22 and s.s == 10.5
    assert SpinQuantumNumber.from_value(1).dim == 3
    assert SpinQuantumNumber.from_value(0.5).two_s == 1
    assert str(s) == "21/2"
    with pytest.raises(ValueError):
        SpinQuantumNumber.from_value("1/3")
    with pytest.raises(ValueError):
        SpinQuantumNumber(-1)


@pytest.mark.parametrize("s", ["1/2", "1", "3/2", "21/2"])
def test_spin_algebra(s):
    ops = spin.spin_matrices(s)
    sx, sy, sz = ops
    val = SpinQuantumNumber.from_value(s).s
    np.testing.assert_allclose(sx @ sy - sy @ sx, 1j * sz, atol=1e-12)
    np.testing.assert_allclose(sy @ sz - sz @ sy, 1j * sx, atol=1e-12)
    np.testing.assert_allclose(sx @ sx + sy @ sy + sz @ sz,
                               val * (val + 1) * np.eye(len(sz)), atol=1e-12)
    # basis order m = S, S-1, ..., -S
    np.testing.assert_allclose(np.diag(sz), np.arange(val, -val - 1, -1))


def test_pauli_limit():
    sx, sy, sz = spin.spin_matrices("1/2")
    np.testing.assert_allclose(2 * sx, [[0, 1], [1, 0]])
    np.testing.assert_allclose(2 * sy, [[0, -1j], [1j, 0]])
    np.testing.assert_allclose(2 * sz, [[1, 0], [0, -1]])


def test_dimension_cap():
    with pytest.raises(ValueError):
        spin.spin_matrices("4096/2", max_dim=4096)


def test_unit_vector_checks():
    with pytest.raises(ValueError):
        spin.unit_vector([1.0, 1.0, 0.0])
    np.testing.assert_allclose(spin.unit(np.pi / 2, 0), [1, 0, 0], atol=1e-16)


@settings(max_examples=40, deadline=None)
@given(angles, st.sampled_from(["1/2", "1", "5/2", "21/2"]))
def test_coherent_state_is_top_eigenvector(ang, s):
    n = spin.unit(*ang)
    chi = spin.coherent_state(s, n)
    sn = spin.spin_matrices(s).dot(n)
    val = SpinQuantumNumber.from_value(s).s
    np.testing.assert_allclose(sn @ chi, val * chi, atol=1e-10)
    k = np.flatnonzero(np.abs(chi) > 1e-12)[0]
    assert abs(chi[k].imag) < 1e-14 and chi[k].real > 0


def test_coherent_state_poles():
    up = spin.coherent_state("21/2", (0, 0, 1))
    down = spin.coherent_state("21/2", (0, 0, -1))
    assert abs(up[0]) == pytest.approx(1)
    assert abs(down[-1]) == pytest.approx(1)


@settings(max_examples=40, deadline=None)
@given(angles, angles)
def test_bloch_vector_of_products(a1, a2):
    n1 = spin.unit(*a1)
    chi1 = spin.coherent_state("1/2", n1)
    chi2 = spin.coherent_state("3/2", spin.unit(*a2))
    k = spin.bloch_vector(state.product_state(chi1, chi2))
    np.testing.assert_allclose(k, n1, atol=1e-10)


def test_bloch_vector_bell_is_zero():
    c = np.array([[1, 0], [0, 1]]) / np.sqrt(2)
    np.testing.assert_allclose(spin.bloch_vector(c), 0, atol=1e-16)


def test_bloch_needs_spin_half():
    with pytest.raises(ValueError):
        spin.bloch_vector(state.random_state(3, 2).c)


def test_dipolar_hamiltonian():
    u = spin.unit(0.3, 1.1)
    h = spin.dipolar_hamiltonian("1/2", "21/2", 2.0, u)
    a, b = h.factors
    np.testing.assert_allclose(np.kron(a, b), h.matrix)
    np.testing.assert_allclose(h.matrix, h.matrix.conj().T)
    assert h.matrix.shape == (44, 44)
    with pytest.raises(ValueError):
        spin.dipolar_hamiltonian("1/2", "1/2", 0.0, u)


def test_dipolar_spectrum():
    # eigenvalues omega m1 m2 regardless of the axis
    h = spin.dipolar_hamiltonian("1/2", "3/2", 1.0, spin.unit(1.0, 2.0))
    expect = sorted(m1 * m2 for m1 in (0.5, -0.5) for m2 in (1.5, 0.5, -0.5, -1.5))
    np.testing.assert_allclose(np.linalg.eigvalsh(h.matrix), expect, atol=1e-12)


def test_local_expectation_matches_kron(rng):
    c = state.random_state(2, 4, rng).c
    sx1 = spin.spin_matrices("1/2").sx
    sz2 = spin.spin_matrices("3/2").sz
    assert spin.local_expectation(c, sx1, 1) == pytest.approx(
        spin.expectation(c.ravel(), np.kron(sx1, np.eye(4))))
    assert spin.local_expectation(c, sz2, 2) == pytest.approx(
        spin.expectation(c.ravel(), np.kron(np.eye(2), sz2)))
