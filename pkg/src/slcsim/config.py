"""Run configuration: parsing, validation, canonical serialization.

The on-disk format is sectioned ``key = value`` text (INI).  Parsing is
strict: unknown sections or keys are errors, and every violation found is
reported in one aggregated message rather than first-failure-wins.  A
round trip through ``to_text``/``parse_config`` is lossless.

No physics parameter defaults silently: the resolved configuration, with
every default filled in, is echoed into the run manifest before compute.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass

from .errors import ConfigError
from .grid import Grid, build_grid
from .operators import MagneticFieldSpec, NoiseCoefficientSpec

__all__ = ["SimConfig", "parse_config", "parse_config_file", "to_text", "default_config"]


@dataclass(frozen=True)
class SimConfig:
    """All physical, numerical, noise, and bookkeeping parameters of a run."""

    # [grid]
    n_dim: int = 2
    cells: tuple[int, ...] = (64, 64)
    lengths: tuple[float, ...] = (1.0, 1.0)
    # [time]
    dt: float = 1e-3
    horizon: float = 1.0
    scheme: str = "em"
    # [physics]
    eps: float = 1.0
    q: float = 2.0
    # [velocity_noise]
    noise_kind: str = "additive_trace_class"
    sigma: float = 0.05
    decay_exponent: float = 1.5
    mode_count: int = 16
    clip: float = 1.0
    # [magnetic]
    magnetic_profile: str = "sine_bump"
    magnetic_amplitude: float = 1.0
    # [initial]
    velocity_profile: str = "taylor_vortex"
    velocity_amplitude: float = 1.0
    director_profile: str = "twist"
    director_amplitude: float = 0.9
    # [picard]
    window: float = 0.0625
    tolerance: float = 1e-9
    max_iterations: int = 60
    truncation_radius: float = 1e6
    # [stopping]
    thresholds: tuple[float, ...] = (1000.0,)
    # [diagnostics]
    record_every: int = 1
    freeze_velocity: bool = False
    director_diffusion: bool = True
    enable_penalty: bool = True
    enable_transport: bool = True
    # [output]
    save_snapshots: bool = False
    snapshot_every: int = 0
    # [run]
    seed: int = 0
    trajectories: int = 1

    def grid(self) -> Grid:
        return build_grid(self.n_dim, self.cells, self.lengths)

    def noise_spec(self) -> NoiseCoefficientSpec:
        return NoiseCoefficientSpec(
            kind=self.noise_kind,
            sigma=self.sigma,
            decay_exponent=self.decay_exponent,
            mode_count=self.mode_count,
            clip=self.clip,
        )

    def magnetic_spec(self) -> MagneticFieldSpec:
        return MagneticFieldSpec(
            profile=self.magnetic_profile, amplitude=self.magnetic_amplitude
        )

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.horizon / self.dt)))


_SCHEMA: dict[str, dict[str, tuple[str, type]]] = {
    "grid": {"n_dim": ("n_dim", int), "cells": ("cells", tuple), "lengths": ("lengths", tuple)},
    "time": {"dt": ("dt", float), "horizon": ("horizon", float), "scheme": ("scheme", str)},
    "physics": {"eps": ("eps", float), "q": ("q", float)},
    "velocity_noise": {
        "kind": ("noise_kind", str),
        "sigma": ("sigma", float),
        "decay_exponent": ("decay_exponent", float),
        "mode_count": ("mode_count", int),
        "clip": ("clip", float),
    },
    "magnetic": {
        "profile": ("magnetic_profile", str),
        "amplitude": ("magnetic_amplitude", float),
    },
    "initial": {
        "velocity": ("velocity_profile", str),
        "velocity_amplitude": ("velocity_amplitude", float),
        "director": ("director_profile", str),
        "director_amplitude": ("director_amplitude", float),
    },
    "picard": {
        "window": ("window", float),
        "tolerance": ("tolerance", float),
        "max_iterations": ("max_iterations", int),
        "truncation_radius": ("truncation_radius", float),
    },
    "stopping": {"thresholds": ("thresholds", tuple)},
    "diagnostics": {
        "record_every": ("record_every", int),
        "freeze_velocity": ("freeze_velocity", bool),
        "director_diffusion": ("director_diffusion", bool),
        "enable_penalty": ("enable_penalty", bool),
        "enable_transport": ("enable_transport", bool),
    },
    "output": {
        "save_snapshots": ("save_snapshots", bool),
        "snapshot_every": ("snapshot_every", int),
    },
    "run": {"seed": ("seed", int), "trajectories": ("trajectories", int)},
}

_BOOL = {"true": True, "false": False, "yes": True, "no": False, "1": True, "0": False}


def _convert(raw: str, kind: type, attr: str, errors: list[str]):
    raw = raw.strip()
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is bool:
            if raw.lower() not in _BOOL:
                raise ValueError(raw)
            return _BOOL[raw.lower()]
        if kind is tuple:
            parts = raw.replace(",", " ").split()
            if attr == "cells":
                return tuple(int(p) for p in parts)
            return tuple(float(p) for p in parts)
        return raw
    except ValueError:
        errors.append(f"{attr}: cannot parse {raw!r} as {kind.__name__}")
        return None


def parse_config(text: str) -> SimConfig:
    """Parse sectioned key=value text into a validated SimConfig."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from exc

    errors: list[str] = []
    values: dict[str, object] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            errors.append(f"unknown section [{section}]")
            continue
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                errors.append(f"unknown key {key!r} in [{section}]")
                continue
            attr, kind = _SCHEMA[section][key]
            val = _convert(raw, kind, attr, errors)
            if val is not None:
                values[attr] = val

    if errors:
        raise ConfigError("invalid config:\n  " + "\n  ".join(errors))

    cfg = SimConfig(**values)
    validate(cfg)
    return cfg


def parse_config_file(path) -> SimConfig:
    with open(path, "r") as f:
        return parse_config(f.read())


def validate(cfg: SimConfig) -> None:
    """Check every constraint; raise one ConfigError aggregating all violations."""
    errors: list[str] = []
    if cfg.n_dim not in (2, 3):
        errors.append(f"n_dim must be 2 or 3, got {cfg.n_dim}")
    else:
        try:
            cfg.grid()
        except ValueError as exc:
            errors.append(str(exc))
    if not cfg.dt > 0.0:
        errors.append(f"dt must be positive, got {cfg.dt}")
    if not cfg.horizon > 0.0:
        errors.append(f"horizon must be positive, got {cfg.horizon}")
    if cfg.scheme not in ("em", "picard"):
        errors.append(f"scheme must be em or picard, got {cfg.scheme!r}")
    if not cfg.eps > 0.0:
        errors.append(f"eps must be positive, got {cfg.eps}")
    if cfg.q < 2.0:
        errors.append(f"q must be at least 2, got {cfg.q}")
    try:
        cfg.noise_spec()
    except ConfigError as exc:
        errors.append(str(exc))
    try:
        cfg.magnetic_spec()
    except ConfigError as exc:
        errors.append(str(exc))
    if cfg.velocity_profile not in ("zero", "taylor_vortex"):
        errors.append(f"unknown velocity profile {cfg.velocity_profile!r}")
    if cfg.director_profile not in ("uniform", "twist"):
        errors.append(f"unknown director profile {cfg.director_profile!r}")
    if not 0.0 < cfg.director_amplitude <= 1.0:
        errors.append("director_amplitude must lie in (0, 1]")
    if cfg.velocity_amplitude < 0.0:
        errors.append("velocity_amplitude must be nonnegative")
    if not cfg.window > 0.0:
        errors.append(f"picard window must be positive, got {cfg.window}")
    if not cfg.tolerance > 0.0:
        errors.append("picard tolerance must be positive")
    if cfg.max_iterations < 1:
        errors.append("picard max_iterations must be at least 1")
    if not cfg.truncation_radius > 0.0:
        errors.append("truncation_radius must be positive")
    if not cfg.thresholds or any(k <= 0.0 for k in cfg.thresholds):
        errors.append("thresholds must be positive")
    elif list(cfg.thresholds) != sorted(cfg.thresholds):
        errors.append("thresholds must be ascending")
    if cfg.record_every < 1:
        errors.append("record_every must be at least 1")
    if cfg.snapshot_every < 0:
        errors.append("snapshot_every must be nonnegative")
    if cfg.seed < 0:
        errors.append("seed must be a nonnegative integer")
    if cfg.trajectories < 1:
        errors.append("trajectories must be at least 1")
    if errors:
        raise ConfigError("invalid config:\n  " + "\n  ".join(errors))


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return " ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_text(cfg: SimConfig) -> str:
    """Canonical full serialization; parse_config(to_text(cfg)) == cfg."""
    out = io.StringIO()
    for section, keys in _SCHEMA.items():
        out.write(f"[{section}]\n")
        for key, (attr, _) in keys.items():
            out.write(f"{key} = {_format(getattr(cfg, attr))}\n")
        out.write("\n")
    return out.getvalue()


def default_config() -> SimConfig:
    cfg = SimConfig()
    validate(cfg)
    return cfg
