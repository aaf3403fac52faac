"""Experiment configuration: JSON documents with dotted-key overrides.

Angles may be given in radians or as multiples of pi (``"0.55pi"``).
"""
from __future__ import annotations

import dataclasses
import json
import math
import re
from dataclasses import dataclass, field

EXPERIMENTS = ("trajectory", "basins", "noise_curve", "schmidt_flow", "validate")


class ConfigError(ValueError):
    pass


_PI_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*pi\s*$")


def parse_angle(value) -> float:
    """Radians from a number or a string like ``"0.55pi"``, ``"pi"``, ``"-0.5*pi"``."""
    if isinstance(value, bool):
        raise ConfigError(f"not an angle: {value!r}")
    if isinstance(value, (int, float)):
        x = float(value)
    elif isinstance(value, str):
        m = _PI_RE.match(value.lower())
        if m:
            x = float(m.group(1) or 1.0) * math.pi
        else:
            try:
                x = float(value)
            except ValueError:
                raise ConfigError(f"not an angle: {value!r}") from None
    else:
        raise ConfigError(f"not an angle: {value!r}")
    if not math.isfinite(x):
        raise ConfigError(f"angle must be finite, got {value!r}")
    return x


@dataclass
class SpinSection:
    two_s1: int = 1
    two_s2: int = 21


@dataclass
class RatesSection:
    gamma_mode: str = "constant"
    gamma: float = 1.0
    omega_d: float = 1.0


@dataclass
class GeometrySection:
    """(theta, phi) pairs in radians."""

    u_d: tuple = (0.375 * math.pi, 0.75 * math.pi)
    n1: tuple = (0.5 * math.pi, 0.5 * math.pi)
    n2: tuple = (math.pi, 0.0)


@dataclass
class SimSection:
    dt_initial: float = 1e-3
    t_max: float = 30.0
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    renorm_each_step: bool = True
    sample_stride: int = 1


@dataclass
class NoiseSection:
    phi0: float = 0.5
    theta_grid_size: int = 181
    mc_samples: int = 0
    seed: int = 0


@dataclass
class BasinsSection:
    n_theta: int = 36
    n_phi: int = 72
    eps: float = 0.01


@dataclass
class FlowSection:
    """Coefficient-flow run: ``M = min(n1, n2)`` Schmidt coefficients."""

    n1: int = 10
    n2: int = 10
    gamma: float = 1.0
    t_max: float = 40.0
    perturbation: float = 1e-3
    index: int = 0
    checkpoints: int = 20
    cross_check_t_max: float = 20.0
    initial: str = "perturbed_uniform"


@dataclass
class OutputSection:
    path: str = "out"
    format: str = "csv"


@dataclass
class ExperimentConfig:
    experiment: str = "trajectory"
    spin: SpinSection = field(default_factory=SpinSection)
    rates: RatesSection = field(default_factory=RatesSection)
    geometry: GeometrySection = field(default_factory=GeometrySection)
    sim: SimSection = field(default_factory=SimSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    basins: BasinsSection = field(default_factory=BasinsSection)
    flow: FlowSection = field(default_factory=FlowSection)
    output: OutputSection = field(default_factory=OutputSection)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["geometry"] = {k: list(v) for k, v in d["geometry"].items()}
        return d

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.spin.two_s1 < 1 or self.spin.two_s2 < 1:
            raise ConfigError("spin.two_s1 and spin.two_s2 must be >= 1")
        if (self.spin.two_s1 + 1) * (self.spin.two_s2 + 1) > 4096:
            raise ConfigError("total dimension (2 S1 + 1)(2 S2 + 1) exceeds the cap of 4096")
        if self.experiment == "basins" and self.spin.two_s1 != 1:
            raise ConfigError("basins needs spin.two_s1 = 1 (a spin-1/2 probe)")
        r = self.rates
        if r.gamma_mode not in ("constant", "coupling"):
            raise ConfigError("rates.gamma_mode must be 'constant' or 'coupling'")
        if r.gamma < 0 or r.omega_d <= 0:
            raise ConfigError("rates.gamma must be >= 0 and rates.omega_d > 0")
        s = self.sim
        if not (s.dt_initial > 0 and s.t_max >= 0):
            raise ConfigError("sim.dt_initial must be > 0 and sim.t_max >= 0")
        if s.t_max > 0 and s.dt_initial >= s.t_max:
            raise ConfigError("sim.dt_initial must be smaller than sim.t_max")
        if not (0 < s.rel_tol <= 1e-2 and 0 < s.abs_tol <= 1e-2):
            raise ConfigError("sim tolerances must lie in (0, 1e-2]")
        if s.sample_stride < 1:
            raise ConfigError("sim.sample_stride must be >= 1")
        n = self.noise
        if n.phi0 <= 0:
            raise ConfigError("noise.phi0 must be > 0")
        if n.theta_grid_size < 2 or n.mc_samples < 0:
            raise ConfigError("noise.theta_grid_size must be >= 2 and mc_samples >= 0")
        b = self.basins
        if b.n_theta < 2 or b.n_phi < 2:
            raise ConfigError("basins grid sizes must be >= 2")
        if not 0 < b.eps < 0.5:
            raise ConfigError("basins.eps must lie in (0, 0.5)")
        f = self.flow
        if f.n1 < 1 or f.n2 < 1 or f.n1 * f.n2 > 4096:
            raise ConfigError("flow dimensions must be >= 1 with n1 * n2 <= 4096")
        if f.gamma <= 0 or f.t_max < 0 or f.checkpoints < 2:
            raise ConfigError("flow.gamma must be > 0, t_max >= 0, checkpoints >= 2")
        if not 0 <= f.index < min(f.n1, f.n2):
            raise ConfigError("flow.index out of range")
        if f.initial not in ("perturbed_uniform", "product"):
            raise ConfigError("flow.initial must be 'perturbed_uniform' or 'product'")
        if self.output.format not in ("csv", "json"):
            raise ConfigError("output.format must be 'csv' or 'json'")
        return self


_SECTION_TYPES = {
    "spin": SpinSection, "rates": RatesSection, "geometry": GeometrySection,
    "sim": SimSection, "noise": NoiseSection, "basins": BasinsSection,
    "flow": FlowSection, "output": OutputSection,
}


def _coerce(section, key, value, default):
    if section == "geometry":
        if isinstance(value, str):
            value = [v for v in re.split(r"[,\s]+", value.strip("()[] ")) if v]
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise ConfigError(f"geometry.{key} must be a (theta, phi) pair")
        return (parse_angle(value[0]), parse_angle(value[1]))
    if isinstance(default, bool):
        if isinstance(value, str):
            if value.lower() in ("true", "1", "yes", "on"):
                return True
            if value.lower() in ("false", "0", "no", "off"):
                return False
            raise ConfigError(f"{section}.{key}: not a boolean: {value!r}")
        return bool(value)
    if isinstance(default, int):
        try:
            f = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{section}.{key}: not an integer: {value!r}") from None
        if f != int(f):
            raise ConfigError(f"{section}.{key}: not an integer: {value!r}")
        return int(f)
    if isinstance(default, float):
        try:
            x = float(value)
        except (TypeError, ValueError):
            try:
                x = parse_angle(value)
            except ConfigError:
                raise ConfigError(f"{section}.{key}: not a number: {value!r}") from None
        if not math.isfinite(x):
            raise ConfigError(f"{section}.{key} must be finite")
        return x
    return str(value)


def from_dict(data: dict) -> ExperimentConfig:
    cfg = ExperimentConfig()
    for key, value in (data or {}).items():
        if key == "experiment":
            cfg.experiment = str(value).replace("-", "_")
            continue
        if key not in _SECTION_TYPES:
            raise ConfigError(f"unknown config section {key!r}")
        if not isinstance(value, dict):
            raise ConfigError(f"config section {key!r} must be an object")
        for k, v in value.items():
            _set(cfg, key, k, v)
    return cfg


def _set(cfg, section, key, value):
    sec = getattr(cfg, section)
    names = {f.name for f in dataclasses.fields(sec)}
    if key not in names:
        raise ConfigError(f"unknown key {section}.{key}")
    setattr(sec, key, _coerce(section, key, value, getattr(sec, key)))


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    """Apply ``section.key=value`` strings in order."""
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, value = item.split("=", 1)
        key = key.strip()
        if key == "experiment":
            cfg.experiment = value.strip().replace("-", "_")
            continue
        if "." not in key:
            raise ConfigError(f"override key must be dotted (section.key), got {key!r}")
        section, name = key.split(".", 1)
        if section not in _SECTION_TYPES:
            raise ConfigError(f"unknown config section {section!r}")
        value = value.strip()
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        _set(cfg, section, name, parsed)
    return cfg


def load(path=None, overrides=None, experiment=None) -> ExperimentConfig:
    data = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config document must be a JSON object")
    cfg = from_dict(data)
    if experiment is not None:
        cfg.experiment = experiment.replace("-", "_")
    return apply_overrides(cfg, overrides).validate()
