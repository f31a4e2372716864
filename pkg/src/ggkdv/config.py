"""Experiment configuration: a single YAML file describing one run.

The file is the unit of reproducibility: everything a run needs (grid,
coefficients, initial condition, stepping, which checks to evaluate, output
paths) lives in it, it round-trips losslessly through load/save, and unknown
keys are rejected so committed fixtures cannot drift silently.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
import os
import tempfile

import numpy as np
import yaml

from .model import CoefficientSet, SimState, reduce_mean
from .spectral import GridSpec, SpectralField, from_samples, make_grid

PRESETS = ("single-mode", "random-smooth", "two-soliton-like")

DEFAULT_CHECKS = ("L2", "GEN_N", "H1", "H2", "POINCARE", "PRODUCT_BOUND",
                  "DECAY")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class InitialSpec:
    """Named initial-condition family plus its parameters.

    `seed` and `kmax` only matter for the random-smooth preset but are kept
    (with defaults) for every preset so specs round-trip as plain mappings.
    Means are carried separately from the zero-mean evolving fields.
    """

    preset: str = "single-mode"
    amplitude: float = 0.1
    seed: int = 0
    kmax: int = 8
    mean_u: float = 0.0
    mean_v: float = 0.0


@dataclass(frozen=True)
class VerifySpec:
    """Sizes and seeds for the `gg verify` battery."""

    n_states: int = 20
    amplitude: float = 0.1
    seed: int = 0
    kmax: int = 8
    poincare_fields: int = 100
    product_fields: int = 50


@dataclass(frozen=True)
class ExperimentConfig:
    n_points: int = 256
    coefficients: CoefficientSet = field(
        default_factory=lambda: CoefficientSet(a1=1.0, a2=1.0, a3=0.5, k=1.0))
    initial: InitialSpec = field(default_factory=InitialSpec)
    dt: float | None = None  # None -> integrator default_dt rule
    t_final: float = 10.0
    stride: int = 1
    n_max: int = 4
    fit_window: tuple | None = None  # None -> (t_final/2, t_final)
    checks: tuple = DEFAULT_CHECKS
    csv_path: str | None = None
    summary_path: str | None = None
    plot_path: str | None = None
    verify: VerifySpec = field(default_factory=VerifySpec)

    def resolved_fit_window(self) -> tuple:
        if self.fit_window is not None:
            return self.fit_window
        return (self.t_final / 2.0, self.t_final)


def _require_keys(mapping: dict, allowed: tuple, where: str) -> None:
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys {unknown} in {where}; "
                          f"allowed: {sorted(allowed)}")


def _section(raw: dict, name: str) -> dict:
    value = raw.get(name, {})
    if value is None:
        value = {}
    if not isinstance(value, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    return value


def _build(cls, mapping: dict, where: str):
    names = tuple(f.name for f in fields(cls))
    _require_keys(mapping, names, where)
    try:
        return cls(**mapping)
    except TypeError as exc:
        raise ConfigError(f"bad {where}: {exc}") from None


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    _require_keys(raw, ("grid", "coefficients", "initial", "run", "checks",
                        "output", "verify"), "config root")

    grid_sec = _section(raw, "grid")
    _require_keys(grid_sec, ("n_points",), "grid")
    n_points = grid_sec.get("n_points", 256)
    if not isinstance(n_points, int) or n_points < 8 or n_points % 2:
        raise ConfigError(f"grid.n_points must be an even integer >= 8, "
                          f"got {n_points!r}")

    coeffs = _build(CoefficientSet, _section(raw, "coefficients"),
                    "coefficients")
    initial = _build(InitialSpec, _section(raw, "initial"), "initial")
    if initial.preset not in PRESETS:
        raise ConfigError(f"unknown preset {initial.preset!r}; "
                          f"choose from {PRESETS}")

    run_sec = _section(raw, "run")
    _require_keys(run_sec, ("dt", "t_final", "stride", "n_max", "fit_window"),
                  "run")
    fit_window = run_sec.get("fit_window")
    if fit_window is not None:
        fit_window = tuple(float(x) for x in fit_window)
        if len(fit_window) != 2 or not fit_window[0] < fit_window[1]:
            raise ConfigError(f"run.fit_window must be [t0, t1] with t0 < t1, "
                              f"got {fit_window}")

    checks = raw.get("checks", list(DEFAULT_CHECKS))
    if not isinstance(checks, list) or not all(isinstance(c, str)
                                               for c in checks):
        raise ConfigError("checks must be a list of check names")
    unknown = sorted(set(checks) - set(DEFAULT_CHECKS))
    if unknown:
        raise ConfigError(f"unknown checks {unknown}; "
                          f"allowed: {sorted(DEFAULT_CHECKS)}")

    out_sec = _section(raw, "output")
    _require_keys(out_sec, ("csv", "summary", "plot"), "output")

    verify = _build(VerifySpec, _section(raw, "verify"), "verify")

    cfg = ExperimentConfig(
        n_points=n_points,
        coefficients=coeffs,
        initial=initial,
        dt=None if run_sec.get("dt") is None else float(run_sec["dt"]),
        t_final=float(run_sec.get("t_final", 10.0)),
        stride=int(run_sec.get("stride", 1)),
        n_max=int(run_sec.get("n_max", 4)),
        fit_window=fit_window,
        checks=tuple(checks),
        csv_path=out_sec.get("csv"),
        summary_path=out_sec.get("summary"),
        plot_path=out_sec.get("plot"),
        verify=verify)

    if cfg.dt is not None and cfg.dt <= 0.0:
        raise ConfigError(f"run.dt must be positive, got {cfg.dt}")
    if cfg.t_final <= 0.0:
        raise ConfigError(f"run.t_final must be positive, got {cfg.t_final}")
    if cfg.stride < 1:
        raise ConfigError(f"run.stride must be >= 1, got {cfg.stride}")
    if not 0 <= cfg.n_max <= 8:
        raise ConfigError(f"run.n_max must be in [0, 8], got {cfg.n_max}")
    return cfg


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return {
        "grid": {"n_points": cfg.n_points},
        "coefficients": cfg.coefficients.to_dict(),
        "initial": {
            "preset": cfg.initial.preset,
            "amplitude": cfg.initial.amplitude,
            "seed": cfg.initial.seed,
            "kmax": cfg.initial.kmax,
            "mean_u": cfg.initial.mean_u,
            "mean_v": cfg.initial.mean_v,
        },
        "run": {
            "dt": cfg.dt,
            "t_final": cfg.t_final,
            "stride": cfg.stride,
            "n_max": cfg.n_max,
            "fit_window": (None if cfg.fit_window is None
                           else list(cfg.fit_window)),
        },
        "checks": list(cfg.checks),
        "output": {
            "csv": cfg.csv_path,
            "summary": cfg.summary_path,
            "plot": cfg.plot_path,
        },
        "verify": {
            "n_states": cfg.verify.n_states,
            "amplitude": cfg.verify.amplitude,
            "seed": cfg.verify.seed,
            "kmax": cfg.verify.kmax,
            "poincare_fields": cfg.verify.poincare_fields,
            "product_fields": cfg.verify.product_fields,
        },
    }


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"could not parse {path}: {exc}") from None
    if raw is None:
        raw = {}
    return config_from_dict(raw)


def save_config(cfg: ExperimentConfig, path: str) -> None:
    atomic_write_text(path, yaml.safe_dump(config_to_dict(cfg),
                                           sort_keys=False))


def atomic_write_text(path: str, text: str) -> None:
    """Write-then-rename so readers never observe a partial file."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _periodized_sech2(x: np.ndarray, center: float, width: float
                      ) -> np.ndarray:
    """sech^2 bump wrapped onto the unit circle (three nearest images)."""
    out = np.zeros_like(x)
    for image in (-1.0, 0.0, 1.0):
        out += 1.0 / np.cosh((x - center + image) / width) ** 2
    return out


def build_initial_state(cfg: ExperimentConfig,
                        grid: GridSpec | None = None) -> SimState:
    grid = make_grid(cfg.n_points) if grid is None else grid
    spec = cfg.initial

    def exactly_zero_mean(samples):
        # These presets have analytic mean zero; the sampled FFT mean is pure
        # round-off and would register as spurious drift at large amplitudes.
        coeffs = from_samples(grid, samples).coeffs.copy()
        coeffs[0] = 0.0
        return SpectralField(grid, coeffs)

    x = grid.nodes()
    if spec.preset == "single-mode":
        u = exactly_zero_mean(spec.amplitude * np.sin(2.0 * np.pi * x))
        v = exactly_zero_mean(spec.amplitude * np.cos(2.0 * np.pi * x))
        state = SimState(u=u, v=v, t=0.0, mean_u=0.0, mean_v=0.0)
    elif spec.preset == "random-smooth":
        from .verification import random_smooth_state
        state = random_smooth_state(grid, seed=spec.seed,
                                    amplitude=spec.amplitude, kmax=spec.kmax)
    else:  # two-soliton-like
        u = spec.amplitude * _periodized_sech2(x, 0.35, 0.06)
        v = 0.6 * spec.amplitude * _periodized_sech2(x, 0.65, 0.08)
        state = reduce_mean(from_samples(grid, u), from_samples(grid, v))
    if spec.mean_u or spec.mean_v:
        state = SimState(u=state.u, v=state.v, t=state.t,
                         mean_u=state.mean_u + spec.mean_u,
                         mean_v=state.mean_v + spec.mean_v)
    return state


def apply_overrides(cfg: ExperimentConfig, point: dict) -> ExperimentConfig:
    """New config with sweep-axis values substituted (k, a3, amplitude)."""
    coeffs = cfg.coefficients
    initial = cfg.initial
    for name, value in point.items():
        if name in ("k", "a3", "a1", "a2"):
            coeffs = replace(coeffs, **{name: float(value)})
        elif name == "amplitude":
            initial = replace(initial, amplitude=float(value))
        else:
            raise ConfigError(f"unknown sweep axis {name!r}; "
                              f"allowed: a1, a2, a3, k, amplitude")
    return replace(cfg, coefficients=coeffs, initial=initial)
