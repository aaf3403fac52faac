import csv
import json
import math

import numpy as np
import pytest

from disentangle import cli, config
from disentangle.config import ConfigError


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _manifest(out):
    with open(out / "manifest.json") as fh:
        return json.load(fh)


@pytest.mark.parametrize("text, value", [
    ("0.55pi", 0.55 * math.pi), ("pi", math.pi), ("-0.5*pi", -0.5 * math.pi),
    ("1.5", 1.5), (2, 2.0), ("2e-1 pi", 0.2 * math.pi),
])
def test_parse_angle(text, value):
    assert config.parse_angle(text) == pytest.approx(value)


@pytest.mark.parametrize("bad", ["pie", "inf", True, None, "nan"])
def test_parse_angle_rejects(bad):
    with pytest.raises(ConfigError):
        config.parse_angle(bad)


def test_defaults_reproduce_tilted_case():
    cfg = config.load()
    assert cfg.spin.two_s1 == 1 and cfg.spin.two_s2 == 21
    assert cfg.rates.gamma == 1.0 and cfg.rates.omega_d == 1.0
    assert cfg.geometry.u_d == pytest.approx((0.375 * math.pi, 0.75 * math.pi))
    assert cfg.geometry.n1 == pytest.approx((0.5 * math.pi, 0.5 * math.pi))
    assert cfg.geometry.n2 == pytest.approx((math.pi, 0.0))


def test_overrides_and_round_trip(tmp_path):
    doc = {"experiment": "noise-curve", "noise": {"phi0": 0.25},
           "geometry": {"n1": ["0.55pi", "0.45pi"]}}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(doc))
    cfg = config.load(path, ["sim.t_max=12", "sim.renorm_each_step=false",
                             "basins.n_theta=4", "geometry.u_d=[0.5pi, 0]"])
    assert cfg.experiment == "noise_curve"
    assert cfg.noise.phi0 == 0.25
    assert cfg.sim.t_max == 12.0 and cfg.sim.renorm_each_step is False
    assert cfg.basins.n_theta == 4
    assert cfg.geometry.u_d == pytest.approx((math.pi / 2, 0.0))
    again = config.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg


@pytest.mark.parametrize("override", [
    "sim.t_max=-1", "rates.gamma=-0.1", "rates.omega_d=0", "basins.n_theta=1",
    "noise.phi0=0", "spin.two_s2=4095", "sim.rel_tol=0.5", "output.format=xml",
    "nosuch.key=1", "sim.nosuch=1", "sim.sample_stride=1.5", "rates.gamma=abc",
    "geometry.n1=[1]", "novalue", "flow.index=10", "rates.gamma_mode=sometimes",
])
def test_invalid_overrides(override):
    with pytest.raises(ConfigError):
        config.load(overrides=[override])


def test_basins_need_spin_half():
    with pytest.raises(ConfigError):
        config.load(overrides=["spin.two_s1=2"], experiment="basins")
    config.load(overrides=["spin.two_s1=2"], experiment="trajectory")


def test_bad_config_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        config.load(p)
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        config.load(p)


# ------------------------------------------------------------------ CLI


def test_cli_invalid_config_exit_code(tmp_path, capsys):
    rc = cli.main(["trajectory", "--out", str(tmp_path), "--set", "spin.two_s2=5000"])
    assert rc == cli.EXIT_CONFIG
    assert "exceeds" in capsys.readouterr().err
    assert cli.main(["basins", "--config", str(tmp_path / "missing.json")]) == cli.EXIT_CONFIG


def test_cli_trajectory(tmp_path):
    out = tmp_path / "t"
    rc = cli.main(["trajectory", "--out", str(out), "--set", "sim.sample_stride=20"])
    assert rc == 0
    rows = _read_csv(out / "trajectory.csv")
    assert rows[0] == ["t", "kx", "ky", "kz", "purity", "q_expectation", "norm_error"]
    last = [float(x) for x in rows[-1]]
    assert last[0] == 30.0 and last[4] > 0.99
    raw = (out / "trajectory.csv").read_bytes()
    assert raw.count(b"\r\n") == len(rows)
    man = _manifest(out)
    assert set(man) == {"version", "config", "started_at", "duration_seconds", "summary"}
    assert config.from_dict(man["config"]).validate() == config.load(
        overrides=["sim.sample_stride=20", f"output.path={json.dumps(str(out))}"])


def test_cli_trajectory_case2(tmp_path):
    out = tmp_path / "c2"
    rc = cli.main(["trajectory", "--out", str(out), "--set", "geometry.u_d=[0.5pi,0]",
                   "--set", 'geometry.n1=["0.55pi","0.55pi"]', "--set", "sim.sample_stride=50"])
    assert rc == 0
    last = [float(x) for x in _read_csv(out / "trajectory.csv")[-1]]
    # n1 . x < 0 here, so the spin ends on -x
    assert last[4] > 0.99 and last[1] < -0.99


def test_cli_trajectory_t_max_zero(tmp_path):
    out = tmp_path / "z"
    assert cli.main(["trajectory", "--out", str(out), "--set", "sim.t_max=0"]) == 0
    rows = _read_csv(out / "trajectory.csv")
    assert len(rows) == 2
    t, kx, ky, kz, p, q, err = map(float, rows[1])
    assert (t, p, q, err) == (0.0, 1.0, 0.0, 0.0)
    assert ky == pytest.approx(1.0)


def test_cli_trajectory_gamma_zero(tmp_path):
    out = tmp_path / "g0"
    assert cli.main(["trajectory", "--out", str(out), "--set", "rates.gamma=0",
                     "--set", "sim.t_max=5", "--set", "sim.renorm_each_step=false"]) == 0
    rows = np.array(_read_csv(out / "trajectory.csv")[1:], dtype=float)
    assert rows[:, 6].max() < 1e-8
    assert rows[:, 4].min() < 0.99  # plain entangling dynamics


def test_cli_trajectory_failure_writes_partial(tmp_path, monkeypatch):
    from disentangle.dynamics import StiffnessError

    real = cli.integrate

    def failing(psi0, h, policy, sim):
        tr = real(psi0, h, policy, type(sim)(t_max=0.5))
        raise StiffnessError("step size underflow", t=0.5, partial=tr)

    monkeypatch.setattr(cli, "integrate", failing)
    out = tmp_path / "f"
    assert cli.main(["trajectory", "--out", str(out)]) == cli.EXIT_NUMERIC
    rows = _read_csv(out / "trajectory.csv")
    assert float(rows[-1][0]) == 0.5
    assert "error" in _manifest(out)["summary"]


def test_cli_basins_small_grid_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["--set", "basins.n_theta=2", "--set", "basins.n_phi=2", "--threads", "1"]
    assert cli.main(["basins", "--out", str(a)] + args) == 0
    assert cli.main(["basins", "--out", str(b)] + args) == 0
    rows = _read_csv(a / "basins.csv")
    assert rows[0] == ["theta1", "phi1", "label"] and len(rows) == 5
    assert {r[2] for r in rows[1:]} <= {"1", "-1", "0"}
    assert (a / "basins.csv").read_bytes() == (b / "basins.csv").read_bytes()


def test_cli_noise_curve(tmp_path):
    out = tmp_path / "n"
    assert cli.main(["noise-curve", "--out", str(out), "--threads", "1"]) == 0
    rows = np.array(_read_csv(out / "noise.csv")[1:], dtype=float)
    assert rows.shape == (181, 4)
    np.testing.assert_allclose(rows[:, 0], np.linspace(0, np.pi, 181))
    np.testing.assert_allclose(rows[:, 1] + rows[::-1, 1], 1.0, atol=1e-6)
    assert rows[90, 2] == pytest.approx(0.5)
    assert rows[90, 3] == 0.5


def test_cli_noise_curve_wide_and_mc(tmp_path):
    out = tmp_path / "w"
    assert cli.main(["noise-curve", "--out", str(out), "--threads", "1", "--seed", "3",
                     "--set", "noise.phi0=50", "--set", "noise.theta_grid_size=7",
                     "--set", "noise.mc_samples=100000"]) == 0
    rows = np.array(_read_csv(out / "noise.csv")[1:], dtype=float)
    np.testing.assert_allclose(rows[:, 1], 0.5, atol=1e-3)
    man = _manifest(out)
    assert man["config"]["noise"]["seed"] == 3
    assert man["summary"]["monte_carlo_max_z"] < 5


def test_cli_noise_curve_nan_on_failure(tmp_path, monkeypatch):
    from disentangle.state import ComputationError

    real = cli.p_plus

    def flaky(theta, dist):
        if theta > 3:
            raise ComputationError("no convergence")
        return real(theta, dist)

    monkeypatch.setattr(cli, "p_plus", flaky)
    out = tmp_path / "nan"
    rc = cli.main(["noise-curve", "--out", str(out), "--threads", "1",
                   "--set", "noise.theta_grid_size=5"])
    assert rc == cli.EXIT_NUMERIC
    rows = _read_csv(out / "noise.csv")
    assert rows[-1][1] == "nan"
    assert _manifest(out)["summary"]["n_failed"] == 1


def test_cli_schmidt_flow(tmp_path):
    out = tmp_path / "s"
    assert cli.main(["schmidt-flow", "--out", str(out), "--set", "sim.sample_stride=20"]) == 0
    rows = _read_csv(out / "flow.csv")
    assert rows[0] == ["t"] + [f"q_{i}" for i in range(1, 11)] + ["L4", "entropy"]
    last = [float(x) for x in rows[-1]]
    assert last[0] == 40.0 and last[-2] > 1 - 1e-6 and last[-1] < 1e-5
    assert _manifest(out)["summary"]["cross_check_deviation"] < 1e-6


def test_cli_schmidt_flow_product_start(tmp_path):
    out = tmp_path / "p"
    assert cli.main(["schmidt-flow", "--out", str(out), "--set", 'flow.initial="product"',
                     "--set", "flow.n1=3", "--set", "flow.n2=3", "--set", "flow.t_max=5",
                     "--set", "flow.cross_check_t_max=0"]) == 0
    rows = _read_csv(out / "flow.csv")[1:]
    assert all(r[1:] == rows[0][1:] for r in rows)


def test_cli_json_format(tmp_path):
    out = tmp_path / "j"
    assert cli.main(["schmidt-flow", "--out", str(out), "--set", "output.format=json",
                     "--set", "flow.n1=2", "--set", "flow.n2=2", "--set", "flow.t_max=2",
                     "--set", "flow.cross_check_t_max=0"]) == 0
    data = json.loads((out / "flow.json").read_text())
    assert data["columns"] == ["t", "q_1", "q_2", "L4", "entropy"]
    assert data["rows"][0][0] == 0.0


def test_cli_validate_failure_exit_code(tmp_path, monkeypatch):
    from disentangle import validation

    monkeypatch.setattr(validation, "CHECKS", [("state", "nope", lambda: (1.0, 0.0))])
    assert cli.main(["validate", "--out", str(tmp_path)]) == cli.EXIT_VALIDATION
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["passed"] is False and rep["checks"][0]["residual"] == 1.0


def test_csv_float_format_round_trips():
    x = 0.1 + 0.2
    assert float(cli._fmt(x)) == x
    assert cli._fmt(3) == "3"


def test_cli_validate_default_suite_passes(tmp_path):
    assert cli.main(["validate", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["passed"] and rep["n_checks"] == 25
