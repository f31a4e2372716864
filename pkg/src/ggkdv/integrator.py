"""Exponential time differencing (ETDRK4) for the damped coupled-KdV system.

The stiff part is diagonalized once: in the variables w+ = (u+v)/sqrt(2),
w- = (u-v)/sqrt(2) the linear symbol is diagonal with rates
i (2 pi kappa)^3 (1 +/- a3) - k. The four phi-type coefficient tables are
evaluated as contour means over a unit circle around each (complex) rate, which
sidesteps the cancellation in the small-|z| limit; with 32 points the trapezoid
rule on an entire function is exact to machine precision. The mean-advection
terms are folded into the nonlinear remainder, so tables depend only on
(grid, a3, k, dt).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (SimState, ValidatedCoefficients, linear_rates,
                    nonlinear_remainder)
from .spectral import GridSpec, SpectralField, truncate

SQRT2 = np.sqrt(2.0)


class BlowUpError(RuntimeError):
    """Raised when the state first becomes non-finite."""

    def __init__(self, time: float):
        self.time = time
        super().__init__(f"solution blew up: non-finite state at t = {time:.6g}")


def contour_phi_means(z0: np.ndarray, n_points: int = 32) -> tuple:
    """ETDRK4 coefficient kernels averaged over unit circles around z0.

    Returns (q, w1, w2, w3) where, with z = z0 + circle,
      q  = mean (e^{z/2} - 1) / z
      w1 = mean (-4 - z + e^z (4 - 3z + z^2)) / z^3
      w2 = mean (2 + z + e^z (z - 2)) / z^3
      w3 = mean (-4 - 3z - z^2 + e^z (4 - z)) / z^3
    The full circle is required: the rates are genuinely complex, so there is
    no conjugate symmetry to exploit.
    """
    theta = 2.0 * np.pi * (np.arange(n_points) + 0.5) / n_points
    circle = np.exp(1j * theta)
    z = np.asarray(z0, dtype=np.complex128)[..., None] + circle
    ez = np.exp(z)
    q = np.mean((np.exp(z / 2.0) - 1.0) / z, axis=-1)
    w1 = np.mean((-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z ** 3, axis=-1)
    w2 = np.mean((2.0 + z + ez * (z - 2.0)) / z ** 3, axis=-1)
    w3 = np.mean((-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z ** 3, axis=-1)
    return q, w1, w2, w3


def phi1_contour(z: complex, n_points: int = 32) -> complex:
    """(e^z - 1)/z by the same contour-mean trick; exposed for testing."""
    theta = 2.0 * np.pi * (np.arange(n_points) + 0.5) / n_points
    zz = z + np.exp(1j * theta)
    return complex(np.mean((np.exp(zz) - 1.0) / zz))


@dataclass(frozen=True)
class EtdTables:
    """Precomputed exponential coefficients; valid for one (grid, a3, k, dt)."""

    grid: GridSpec
    a3: float
    k: float
    dt: float
    exp_full: np.ndarray  # (2, n_coeffs) e^{lambda dt}
    exp_half: np.ndarray  # (2, n_coeffs) e^{lambda dt / 2}
    q: np.ndarray         # stage weight, dt phi1(lambda dt / 2) / 2
    w1: np.ndarray        # final-combination weights
    w2: np.ndarray
    w3: np.ndarray

    def matches(self, grid: GridSpec, c: ValidatedCoefficients,
                dt: float) -> bool:
        return (self.grid == grid and self.a3 == c.a3 and self.k == c.k
                and self.dt == dt)


def build_tables(grid: GridSpec, c: ValidatedCoefficients, dt: float,
                 n_contour: int = 32) -> EtdTables:
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    lam = linear_rates(grid, c)
    z0 = lam * dt
    q, w1, w2, w3 = contour_phi_means(z0, n_contour)
    return EtdTables(grid=grid, a3=c.a3, k=c.k, dt=dt,
                     exp_full=np.exp(z0), exp_half=np.exp(z0 / 2.0),
                     q=dt * q, w1=dt * w1, w2=dt * w2, w3=dt * w3)


def default_dt(grid: GridSpec, c: ValidatedCoefficients) -> float:
    """Advective-scale default step; the stiff part is handled exactly."""
    return 0.4 / ((1.0 + abs(c.a3)) * 2.0 * np.pi * grid.n_modes)


def _to_eigen(u_hat: np.ndarray, v_hat: np.ndarray) -> np.ndarray:
    return np.stack([u_hat + v_hat, u_hat - v_hat]) / SQRT2


def _from_eigen(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return (w[0] + w[1]) / SQRT2, (w[0] - w[1]) / SQRT2


def _step_arrays(w: np.ndarray, tables: EtdTables, c: ValidatedCoefficients,
                 mean_u: float, mean_v: float, grid: GridSpec,
                 linear_only: bool = False) -> np.ndarray:
    if linear_only:
        out = tables.exp_full * w
        out[:, 0] = 0.0
        return out

    def nl(stage: np.ndarray) -> np.ndarray:
        u_hat, v_hat = _from_eigen(stage)
        nu, nv = nonlinear_remainder(u_hat, v_hat, mean_u, mean_v, c, grid)
        return _to_eigen(nu, nv)

    n0 = nl(w)
    a = tables.exp_half * w + tables.q * n0
    na = nl(a)
    b = tables.exp_half * w + tables.q * na
    nb = nl(b)
    cc = tables.exp_half * a + tables.q * (2.0 * nb - n0)
    nc = nl(cc)
    out = (tables.exp_full * w + tables.w1 * n0
           + 2.0 * tables.w2 * (na + nb) + tables.w3 * nc)
    out[:, 0] = 0.0  # means are conserved exactly; pin against drift
    return out


def step(state: SimState, tables: EtdTables, c: ValidatedCoefficients,
         linear_only: bool = False) -> SimState:
    """One ETDRK4 step of length tables.dt."""
    if not tables.matches(state.grid, c, tables.dt):
        raise ValueError("tables were built for a different grid or coefficients")
    w = _to_eigen(state.u.coeffs, state.v.coeffs)
    w_new = _step_arrays(w, tables, c, state.mean_u, state.mean_v, state.grid,
                         linear_only)
    u_hat, v_hat = _from_eigen(w_new)
    return SimState(u=SpectralField(state.grid, u_hat),
                    v=SpectralField(state.grid, v_hat),
                    t=state.t + tables.dt,
                    mean_u=state.mean_u, mean_v=state.mean_v)


@dataclass
class DiagnosticSeries:
    """Observer outputs sampled along a run, as named columns over times t."""

    t: np.ndarray
    columns: dict
    meta: dict

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]


def evolve(state: SimState, c: ValidatedCoefficients, t_final: float,
           dt: float, observers=(), stride: int = 1,
           tables: EtdTables | None = None,
           linear_only: bool = False) -> DiagnosticSeries:
    """March to t_final, sampling observers every `stride` steps.

    Each observer maps a SimState to a dict of named floats; rows are merged in
    observer order. Raises BlowUpError naming the first time at which the state
    is non-finite. The final state is returned in meta["final_state"].
    """
    span = t_final - state.t
    if span <= 0.0:
        raise ValueError("t_final must exceed the state's current time")
    n_steps = int(round(span / dt))
    if abs(n_steps * dt - span) > 1e-9 * max(1.0, abs(span)):
        raise ValueError(f"dt = {dt} does not divide the span {span}")
    if stride < 1 or n_steps % stride != 0:
        raise ValueError(f"stride {stride} does not divide {n_steps} steps")
    if tables is None:
        tables = build_tables(state.grid, c, dt)
    elif not tables.matches(state.grid, c, dt):
        raise ValueError("tables were built for a different grid, "
                         "coefficients, or dt")

    grid = state.grid
    current = SimState(u=truncate(state.u), v=truncate(state.v), t=state.t,
                       mean_u=state.mean_u, mean_v=state.mean_v)

    times = []
    rows = []
    max_mean_drift = 0.0

    def observe(st: SimState):
        nonlocal max_mean_drift
        drift = max(abs(st.u.coeffs[0]), abs(st.v.coeffs[0]))
        max_mean_drift = max(max_mean_drift, drift)
        if drift > 1e-14:
            raise RuntimeError(f"mean drifted to {drift:.3e} at t = {st.t}")
        row = {}
        for obs in observers:
            row.update(obs(st))
        times.append(st.t)
        rows.append(row)

    observe(current)
    w = _to_eigen(current.u.coeffs, current.v.coeffs)
    for i in range(1, n_steps + 1):
        # overflow is diagnosed via the finiteness check, not warnings
        with np.errstate(over="ignore", invalid="ignore"):
            w = _step_arrays(w, tables, c, current.mean_u, current.mean_v,
                             grid, linear_only)
        t_now = state.t + i * dt
        if not np.all(np.isfinite(w)):
            raise BlowUpError(t_now)
        if i % stride == 0:
            u_hat, v_hat = _from_eigen(w)
            current = SimState(u=SpectralField(grid, u_hat),
                               v=SpectralField(grid, v_hat), t=t_now,
                               mean_u=current.mean_u, mean_v=current.mean_v)
            observe(current)

    keys = list(rows[0].keys()) if rows else []
    columns = {key: np.array([row[key] for row in rows]) for key in keys}
    return DiagnosticSeries(
        t=np.array(times), columns=columns,
        meta={"final_state": current, "dt": dt, "stride": stride,
              "n_steps": n_steps, "max_mean_drift": max_mean_drift})


def linear_exact_solution(initial: SimState, c: ValidatedCoefficients,
                          t: float) -> SimState:
    """Closed-form solution of the linear part after elapsed time t >= 0."""
    if t < 0.0:
        raise ValueError("elapsed time must be >= 0")
    lam = linear_rates(initial.grid, c)
    w = _to_eigen(initial.u.coeffs, initial.v.coeffs) * np.exp(lam * t)
    u_hat, v_hat = _from_eigen(w)
    return SimState(u=SpectralField(initial.grid, u_hat),
                    v=SpectralField(initial.grid, v_hat),
                    t=initial.t + t,
                    mean_u=initial.mean_u, mean_v=initial.mean_v)
