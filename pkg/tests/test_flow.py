import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from disentangle import flow
from disentangle.flow import FlowState, MomentSet


@st.composite
def spectra(draw, max_m=8):
    m = draw(st.integers(2, max_m))
    q = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=m, max_size=m)))
    return q / np.linalg.norm(q)


def test_flow_state_validation():
    with pytest.raises(ValueError):
        FlowState([0.5, 0.5])
    with pytest.raises(ValueError):
        FlowState([1.0, -0.0001])
    with pytest.raises(ValueError):
        FlowState([1.0, 0.0], gamma=0.0)
    assert FlowState([0.6, 0.8]).m == 2


def test_moment_set_validation():
    with pytest.raises(ValueError):
        MomentSet({2: 0.9})
    with pytest.raises(ValueError):
        MomentSet({2: 1.0, 4: 0.9, 6: 0.5})
    m = flow.moments([0.6, 0.8])
    assert m[4] == pytest.approx(0.6**4 + 0.8**4)
    with pytest.raises(ValueError):
        flow.moment_rhs(m, 1.0, 6)


@settings(max_examples=50, deadline=None)
@given(spectra())
def test_gradient_equals_flow_on_sphere(q):
    st_ = FlowState(q, 1.5)
    np.testing.assert_allclose(flow.flow_potential_gradient(st_), flow.flow_rhs(st_), atol=1e-13)


@settings(max_examples=50, deadline=None)
@given(spectra())
def test_moment_rates_match_flow(q):
    m = flow.moments(q, 8)
    dq = flow.flow_rhs(FlowState(q, 0.7))
    for n in (2, 4, 6):
        direct = n * np.sum(q ** (n - 1) * dq)
        assert flow.moment_rhs(m, 0.7, n) == pytest.approx(direct, abs=1e-13)
    assert flow.moment_rhs(m, 0.7, 4) >= -1e-14


def test_equilibria_are_stationary():
    for q in ([1.0, 0, 0], [0.5, 0.5, 0.5, 0.5], np.r_[np.full(3, 3**-0.5), 0, 0]):
        assert np.abs(flow.flow_rhs(FlowState(q))).max() < 1e-15


def test_largest_coefficient_wins():
    q0 = flow.perturbed_uniform(5, index=3, rel=1e-3)
    tr = flow.integrate_flow(FlowState(q0, 2.0), 30.0)
    assert tr.unique_attractor and tr.attractor == 3
    assert tr.q[-1, 3] == pytest.approx(1.0, abs=1e-6)
    # ratio q_i/q_j with q_i > q_j never decreases
    # (only while q_0 is well above the solver's absolute tolerance)
    live = tr.q[:, 0] > 1e-8
    r = tr.q[live, 3] / tr.q[live, 0]
    assert np.all(np.diff(r) >= -1e-12 * r[1:])
    assert np.all(np.diff(tr.l4) >= -1e-12)
    assert np.all(np.diff(tr.entropy) <= 1e-12)


def test_zero_coefficients_stay_zero():
    tr = flow.integrate_flow(FlowState([0.8, 0.6, 0.0]), 10.0)
    assert np.all(tr.q[:, 2] == 0)


def test_tie_is_reported():
    tr = flow.integrate_flow(FlowState(np.full(4, 0.5)), 5.0)
    assert not tr.unique_attractor and tr.attractor is None
    np.testing.assert_allclose(tr.q[-1], 0.5, atol=1e-12)


def test_product_start_is_constant():
    tr = flow.integrate_flow(FlowState([1.0, 0, 0]), 5.0)
    np.testing.assert_array_equal(tr.q, np.tile([1.0, 0, 0], (len(tr), 1)))


def test_t_eval_sampling():
    grid = np.linspace(0, 4, 9)
    tr = flow.integrate_flow(FlowState(flow.perturbed_uniform(3)), 4.0, t_eval=grid)
    np.testing.assert_array_equal(tr.t, grid)
    with pytest.raises(ValueError):
        flow.integrate_flow(FlowState([1.0, 0.0]), 1.0, t_eval=[1.0, 0.5])


def test_potential_gradient_off_sphere_is_not_the_flow():
    q = np.array([0.3, 0.9, 0.7])  # L2 != 1
    g = flow.flow_potential_gradient(q, 1.0)
    q2 = q * q
    naive = q * (q2 - np.sum(q2 * q2))
    assert not np.allclose(g, naive)


def test_cross_check_small():
    st_ = FlowState(flow.perturbed_uniform(3, 1, 0.2))
    dev = flow.cross_check_full(st_, (3, 4), np.linspace(0, 5, 6))
    assert dev < 1e-7
    with pytest.raises(ValueError):
        flow.cross_check_full(st_, (2, 4), [0, 1])
