"""``sim`` command-line front end.

Units: hbar = 1, so the rates gamma and omega_d are inverse times and t is
measured in the same units.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone

import numpy as np

from . import __version__, config as config_mod
from .config import ConfigError, ExperimentConfig
from .dynamics import GammaPolicy, SimConfig, StiffnessError, integrate
from .flow import FlowState, cross_check_full, integrate_flow, perturbed_uniform
from .measurement import (SphereGrid, Setup, WrappedCauchy, basin_map, born_rule,
                          p_plus, p_plus_monte_carlo, step_rule)
from .spin import _spin, coherent_state, dipolar_hamiltonian, unit
from .state import BipartiteShape, ComputationError, PureState

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDATION = 0, 1, 2, 3

COMMANDS = {
    "trajectory": "trajectory",
    "basins": "basins",
    "noise-curve": "noise_curve",
    "schmidt-flow": "schmidt_flow",
    "validate": "validate",
}


class NumericalFailure(RuntimeError):
    """Raised after partial output has been written."""

    def __init__(self, msg, summary=None):
        super().__init__(msg)
        self.summary = summary or {}


# ------------------------------------------------------------------ output

def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def write_table(out_dir, stem, columns, rows, fmt="csv"):
    """Write rows as RFC-4180 CSV (CRLF line ends) or as a JSON object."""
    if fmt == "json":
        path = os.path.join(out_dir, stem + ".json")
        data = {"columns": list(columns),
                "rows": [[_json_num(v) for v in r] for r in rows]}
        with open(path, "w") as fh:
            json.dump(data, fh, indent=1)
            fh.write("\n")
        return path
    path = os.path.join(out_dir, stem + ".csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def _json_num(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return int(v)
    v = float(v)
    return v if math.isfinite(v) else None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_manifest(out_dir, cfg: ExperimentConfig, started, duration, summary):
    manifest = {
        "version": __version__,
        "config": cfg.to_dict(),
        "started_at": started,
        "duration_seconds": duration,
        "summary": _jsonable(summary),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


# ------------------------------------------------------------- experiments

def _sim_config(cfg):
    s = cfg.sim
    return SimConfig(dt_initial=s.dt_initial, t_max=s.t_max, rel_tol=s.rel_tol,
                     abs_tol=s.abs_tol, renorm_each_step=s.renorm_each_step,
                     sample_stride=s.sample_stride)


def _setup(cfg):
    g = cfg.geometry
    return Setup(two_s1=cfg.spin.two_s1, two_s2=cfg.spin.two_s2, gamma=cfg.rates.gamma,
                 omega_d=cfg.rates.omega_d, u_d=tuple(unit(*g.u_d)), n2=tuple(unit(*g.n2)),
                 gamma_mode=cfg.rates.gamma_mode, sim=_sim_config(cfg))


def run_trajectory(cfg, out_dir, threads=None):
    s1, s2 = _spin(f"{cfg.spin.two_s1}/2"), _spin(f"{cfg.spin.two_s2}/2")
    g = cfg.geometry
    u_d = unit(*g.u_d)
    h = dipolar_hamiltonian(s1, s2, cfg.rates.omega_d, u_d)
    if cfg.rates.gamma_mode == "coupling":
        policy = GammaPolicy.coupling_driven(h)
    else:
        policy = GammaPolicy.constant(cfg.rates.gamma)
    psi0 = PureState(np.outer(coherent_state(s1, unit(*g.n1)), coherent_state(s2, unit(*g.n2))))
    sim = _sim_config(cfg)

    failure = None
    try:
        traj = integrate(psi0, h, policy, sim)
    except StiffnessError as exc:
        traj, failure = exc.partial, str(exc)

    rows = [(traj.t[i], *traj.k[i], traj.purity[i], traj.q_expectation[i], traj.norm_error[i])
            for i in range(len(traj.t))]
    write_table(out_dir, "trajectory",
                ["t", "kx", "ky", "kz", "purity", "q_expectation", "norm_error"],
                rows, cfg.output.format)
    summary = {
        "n_samples": len(traj.t),
        "n_steps": traj.n_steps,
        "t_final": float(traj.t[-1]),
        "final_purity": float(traj.purity[-1]),
        "min_purity": float(np.min(traj.purity)),
        "final_k": [float(x) for x in traj.k[-1]],
        "final_k_dot_u": float(traj.k[-1] @ u_d),
        "max_norm_error": float(np.max(traj.norm_error)),
    }
    if failure:
        summary["error"] = failure
        raise NumericalFailure(failure, summary)
    return summary


def run_basins(cfg, out_dir, threads=None):
    grid = SphereGrid(cfg.basins.n_theta, cfg.basins.n_phi)
    setup = _setup(cfg)
    bm = basin_map(grid, setup, eps=cfg.basins.eps, threads=threads)
    theta, phi = grid.angles()
    rows = [(theta[i], phi[i], int(bm.labels[i])) for i in range(len(grid))]
    write_table(out_dir, "basins", ["theta1", "phi1", "label"], rows, cfg.output.format)
    a = bm.alignment()
    lab = bm.labels
    far = (np.abs(a) > 0.05) & (lab != 0)
    wrong = int(np.sum(far & (lab != np.sign(a))))
    summary = {
        "n_points": len(grid),
        "n_plus": int(np.sum(lab == 1)),
        "n_minus": int(np.sum(lab == -1)),
        "n_unresolved": int(np.sum(lab == 0)),
        "n_failed": bm.n_failed,
        "n_checked": int(np.sum(far)),
        "n_mismatch": wrong,
    }
    if bm.n_failed:
        raise NumericalFailure(f"{bm.n_failed} grid points failed to integrate", summary)
    return summary


def _noise_point(args):
    theta, phi0 = args
    try:
        return p_plus(theta, WrappedCauchy(phi0))
    except ComputationError:
        return float("nan")


def run_noise_curve(cfg, out_dir, threads=None):
    nz = cfg.noise
    dist = WrappedCauchy(nz.phi0)
    thetas = np.linspace(0.0, np.pi, nz.theta_grid_size)
    jobs = [(float(t), nz.phi0) for t in thetas]
    threads = threads or os.cpu_count() or 1
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            values = list(ex.map(_noise_point, jobs, chunksize=max(1, len(jobs) // threads)))
    else:
        values = [_noise_point(j) for j in jobs]
    p = np.array(values)
    rows = [(t, pv, float(born_rule(t)), float(step_rule(t))) for t, pv in zip(thetas, p)]
    write_table(out_dir, "noise", ["theta1", "p_plus", "born", "step"], rows, cfg.output.format)

    ok = np.isfinite(p)
    comp = np.abs(p + p[::-1] - 1.0)
    summary = {
        "n_points": len(thetas),
        "n_failed": int(np.sum(~ok)),
        "max_complementarity_error": float(np.max(comp[ok & ok[::-1]], initial=0.0)),
        "max_abs_diff_born": float(np.max(np.abs(p - born_rule(thetas))[ok], initial=0.0)),
    }
    if nz.mc_samples > 0:
        worst = 0.0
        for k, t in enumerate(thetas):
            if not ok[k]:
                continue
            pm, se = p_plus_monte_carlo(float(t), dist, nz.mc_samples, seed=nz.seed + k)
            z = abs(pm - p[k]) / se if se > 0 else (0.0 if pm == p[k] else math.inf)
            worst = max(worst, z)
        summary["monte_carlo_samples"] = nz.mc_samples
        summary["monte_carlo_max_z"] = worst
    if summary["n_failed"]:
        raise NumericalFailure(f"quadrature failed at {summary['n_failed']} points", summary)
    return summary


def run_schmidt_flow(cfg, out_dir, threads=None):
    f = cfg.flow
    m = min(f.n1, f.n2)
    if f.initial == "product":
        q0 = np.zeros(m)
        q0[f.index] = 1.0
    else:
        q0 = perturbed_uniform(m, f.index, f.perturbation)
    st = FlowState(q0, f.gamma)
    s = cfg.sim
    traj = integrate_flow(st, f.t_max, dt_initial=min(s.dt_initial, f.t_max or 1.0),
                          sample_stride=s.sample_stride)
    rows = [(traj.t[i], *traj.q[i], traj.l4[i], traj.entropy[i]) for i in range(len(traj))]
    cols = ["t"] + [f"q_{i + 1}" for i in range(m)] + ["L4", "entropy"]
    write_table(out_dir, "flow", cols, rows, cfg.output.format)

    summary = {
        "m": m,
        "n_samples": len(traj),
        "final_l4": float(traj.l4[-1]),
        "final_entropy": float(traj.entropy[-1]),
        "unique_attractor": traj.unique_attractor,
        "attractor": traj.attractor,
    }
    if f.cross_check_t_max > 0:
        grid = np.linspace(0.0, f.cross_check_t_max, f.checkpoints)
        summary["cross_check_deviation"] = cross_check_full(st, BipartiteShape(f.n1, f.n2), grid)
        summary["cross_check_checkpoints"] = f.checkpoints
    return summary


def run_validate(cfg, out_dir, threads=None):
    from .validation import report, run_checks

    def log(c):
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {c.module}.{c.name} residual={c.residual:.3g} "
              f"tol={c.tolerance:.3g} ({c.seconds:.1f}s)", file=sys.stderr)

    rep = report(run_checks(log=log))
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(_jsonable(rep), fh, indent=2)
        fh.write("\n")
    return {"passed": rep["passed"], "n_checks": rep["n_checks"], "n_failed": rep["n_failed"]}


RUNNERS = {
    "trajectory": run_trajectory,
    "basins": run_basins,
    "noise_curve": run_noise_curve,
    "schmidt_flow": run_schmidt_flow,
    "validate": run_validate,
}


# -------------------------------------------------------------------- main

def build_parser():
    p = argparse.ArgumentParser(
        prog="sim",
        description="Disentangling Schrodinger dynamics for two coupled spins. "
                    "Units: hbar = 1; gamma and omega_d are rates (inverse time).")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config document")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="dotted override, e.g. sim.t_max=30")
        sp.add_argument("--out", help="output directory (default: output.path)")
        sp.add_argument("--threads", type=int, help="worker processes (default: all cores)")
        sp.add_argument("--seed", type=int, help="random seed (noise.seed)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    experiment = COMMANDS[args.command]
    try:
        overrides = list(args.overrides)
        if args.seed is not None:
            overrides.append(f"noise.seed={args.seed}")
        if args.out is not None:
            overrides.append(f"output.path={json.dumps(args.out)}")
        cfg = config_mod.load(args.config, overrides, experiment=experiment)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
    except ConfigError as exc:
        print(f"sim: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = cfg.output.path
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    try:
        os.makedirs(out_dir, exist_ok=True)
        summary = RUNNERS[experiment](cfg, out_dir, args.threads)
        code = EXIT_OK
        if experiment == "validate" and not summary["passed"]:
            code = EXIT_VALIDATION
    except NumericalFailure as exc:
        print(f"sim: numerical failure: {exc}", file=sys.stderr)
        summary, code = exc.summary, EXIT_NUMERIC
    except (ValueError, ComputationError, StiffnessError) as exc:
        print(f"sim: numerical failure: {exc}", file=sys.stderr)
        summary, code = {"error": str(exc)}, EXIT_NUMERIC
    except OSError as exc:
        print(f"sim: I/O error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    write_manifest(out_dir, cfg, started, time.perf_counter() - t0, summary)
    return code


if __name__ == "__main__":
    sys.exit(main())
