import numpy as np
import pytest

from disentangle import dynamics, state, validation

HARNESS = ["norm_conservation", "purity_monotone_h0"]


def test_check_names_unique():
    names = [name for _, name, _ in validation.CHECKS]
    assert len(names) == len(set(names))


def test_selected_checks_pass():
    checks = validation.run_checks(HARNESS + ["q_consistency", "equilibria"])
    assert [c.name for c in checks] == ["q_consistency", "norm_conservation",
                                        "purity_monotone_h0", "equilibria"]
    assert all(c.passed for c in checks), checks


def test_injected_sign_flip_is_caught(monkeypatch):
    flipped = lambda c: -state.q_action(c)  # noqa: E731
    monkeypatch.setattr(dynamics, "q_action", flipped)
    monkeypatch.setattr(state, "apply_q", lambda psi: -state.q_action(np.asarray(psi)))
    checks = {c.name: c for c in validation.run_checks(HARNESS)}
    assert not checks["norm_conservation"].passed
    assert not checks["purity_monotone_h0"].passed


def test_crashing_check_is_a_failure(monkeypatch):
    def boom():
        raise RuntimeError("kaput")

    monkeypatch.setattr(validation, "CHECKS", [("state", "boom", boom)])
    (chk,) = validation.run_checks()
    assert not chk.passed and "kaput" in chk.detail
    rep = validation.report([chk])
    assert rep["passed"] is False and rep["n_failed"] == 1


@pytest.mark.parametrize("case", [1, 2, 3, 4])
def test_collapse_setup_initial_state(case):
    psi, h, n1, u = validation.collapse_setup(case)
    assert psi.c.shape == (2, 22)
    assert state.purity(psi) == pytest.approx(1.0)
    assert h.matrix.shape == (44, 44)
    assert np.linalg.norm(u) == pytest.approx(1.0)
