"""Damped coupled-KdV system on the periodic unit interval.

The fields (u, v) evolve, after removal of their conserved means (M, N), under

    u_t = -( (u + M) u_x + u_xxx + a3 v_xxx
             + a1 (v + N) v_x + a2 ((u + M)(v + N))_x + k u )
    v_t = same with (u, M, a1) <-> (v, N, a2) swapped

with damping k (u - mean u), k (v - mean v) in the unreduced system, so mode 0
feels no damping and the means are conserved. The coefficient gate enforces the
regime in which the decay theory holds: r = 0, b1 = b2 = 1, and either a3 = 0
with a1^2 + a2^2 = a1 + a2, or 0 < |a3| < 1 with a1 = a2 = 1.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .spectral import GridSpec, SpectralField, TWO_PI, truncate

CONSTRAINT_TOL = 1e-12


@dataclass(frozen=True)
class CoefficientSet:
    """Raw model coefficients, prior to validation."""

    a1: float
    a2: float
    a3: float
    k: float
    r: float = 0.0
    b1: float = 1.0
    b2: float = 1.0

    def to_dict(self) -> dict:
        return {key: float(val) for key, val in asdict(self).items()}

    @classmethod
    def from_dict(cls, data: dict) -> "CoefficientSet":
        return cls(**{key: float(val) for key, val in data.items()})


@dataclass(frozen=True)
class Violation:
    constraint: str
    message: str

    def __str__(self):
        return f"{self.constraint}: {self.message}"


class CoefficientError(ValueError):
    """Raised when a coefficient set falls outside the decay regime."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


def check_coefficients(c: CoefficientSet) -> list[Violation]:
    """All constraint violations, empty when the set is admissible."""
    bad = []
    if abs(c.r) > CONSTRAINT_TOL:
        bad.append(Violation("r_zero", f"transport coefficient r must be 0, got {c.r}"))
    if abs(c.b1 - 1.0) > CONSTRAINT_TOL:
        bad.append(Violation("b1_unit", f"b1 must be 1, got {c.b1}"))
    if abs(c.b2 - 1.0) > CONSTRAINT_TOL:
        bad.append(Violation("b2_unit", f"b2 must be 1, got {c.b2}"))
    if not c.k > 0.0:
        bad.append(Violation("k_positive", f"damping k must be > 0, got {c.k}"))
    if abs(c.a3) >= 1.0 - CONSTRAINT_TOL:
        bad.append(Violation("a3_magnitude", f"|a3| must be < 1, got {c.a3}"))
    quad = c.a1 ** 2 + c.a2 ** 2 - (c.a1 + c.a2)
    if abs(quad) > CONSTRAINT_TOL:
        bad.append(Violation("a1_a2_quadratic",
                             f"a1^2 + a2^2 = a1 + a2 fails by {quad:.3e}"))
    if abs((c.a1 - 1.0) * c.a3) > CONSTRAINT_TOL:
        bad.append(Violation("a1_a3_coupling",
                             f"(a1 - 1) a3 must be 0, got {(c.a1 - 1.0) * c.a3:.3e}"))
    if abs((c.a2 - 1.0) * c.a3) > CONSTRAINT_TOL:
        bad.append(Violation("a2_a3_coupling",
                             f"(a2 - 1) a3 must be 0, got {(c.a2 - 1.0) * c.a3:.3e}"))
    return bad


@dataclass(frozen=True)
class ValidatedCoefficients:
    """Coefficient set that passed the gate, tagged with its branch."""

    a1: float
    a2: float
    a3: float
    k: float
    r: float
    b1: float
    b2: float
    branch: str  # "a3=0" or "a1=a2=1" (or "extended" via assume_valid)

    def to_coefficient_set(self) -> CoefficientSet:
        return CoefficientSet(a1=self.a1, a2=self.a2, a3=self.a3, k=self.k,
                              r=self.r, b1=self.b1, b2=self.b2)

    @classmethod
    def assume_valid(cls, c: CoefficientSet,
                     branch: str = "extended") -> "ValidatedCoefficients":
        """Bypass the gate; for studies outside the certified regime."""
        return cls(a1=c.a1, a2=c.a2, a3=c.a3, k=c.k, r=c.r, b1=c.b1, b2=c.b2,
                   branch=branch)


def validate_coefficients(c: CoefficientSet) -> ValidatedCoefficients:
    bad = check_coefficients(c)
    if bad:
        raise CoefficientError(bad)
    branch = "a3=0" if c.a3 == 0.0 else "a1=a2=1"
    return ValidatedCoefficients(a1=c.a1, a2=c.a2, a3=c.a3, k=c.k, r=c.r,
                                 b1=c.b1, b2=c.b2, branch=branch)


@dataclass(frozen=True)
class SimState:
    """Zero-mean fields plus the conserved means split off at t = 0."""

    u: SpectralField
    v: SpectralField
    t: float
    mean_u: float  # M
    mean_v: float  # N

    @property
    def grid(self) -> GridSpec:
        return self.u.grid


def reduce_mean(phi: SpectralField, psi: SpectralField,
                t: float = 0.0) -> SimState:
    """Split off the means: u = phi - [phi], v = psi - [psi]."""
    if phi.grid != psi.grid:
        raise ValueError("fields live on different grids")
    mean_u = float(phi.coeffs[0].real)
    mean_v = float(psi.coeffs[0].real)
    cu = phi.coeffs.copy()
    cv = psi.coeffs.copy()
    cu[0] = 0.0
    cv[0] = 0.0
    return SimState(u=SpectralField(phi.grid, cu), v=SpectralField(psi.grid, cv),
                    t=t, mean_u=mean_u, mean_v=mean_v)


def _require_validated(c) -> None:
    if not isinstance(c, ValidatedCoefficients):
        raise TypeError("coefficients must pass validate_coefficients "
                        "(or ValidatedCoefficients.assume_valid)")


def nonlinear_remainder(u_hat: np.ndarray, v_hat: np.ndarray,
                        mean_u: float, mean_v: float,
                        c: ValidatedCoefficients,
                        grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Everything in the rhs except the stiff diagonal linear part.

    Works on raw rfft coefficient arrays (hot path of the time stepper). The
    mean-advection terms ride along here so that the exponential tables depend
    only on (grid, a3, k, dt). Every term is a pure x-derivative, so mode 0 of
    the output is exactly zero in floating point.
    """
    n = grid.n_points
    u_phys = np.fft.irfft(u_hat * n, n=n)
    v_phys = np.fft.irfft(v_hat * n, n=n)
    uu = np.fft.rfft(u_phys * u_phys) / n
    vv = np.fft.rfft(v_phys * v_phys) / n
    uv = np.fft.rfft(u_phys * v_phys) / n

    combo_u = (0.5 * uu + mean_u * u_hat
               + c.a1 * (0.5 * vv + mean_v * v_hat)
               + c.a2 * (uv + mean_v * u_hat + mean_u * v_hat))
    combo_v = (0.5 * vv + mean_v * v_hat
               + c.a2 * (0.5 * uu + mean_u * u_hat)
               + c.a1 * (uv + mean_v * u_hat + mean_u * v_hat))

    omega = TWO_PI * np.arange(grid.n_coeffs)
    nu = -1j * omega * combo_u
    nv = -1j * omega * combo_v
    nu[grid.dealias_cutoff + 1:] = 0.0
    nv[grid.dealias_cutoff + 1:] = 0.0
    return nu, nv


def linear_rates(grid: GridSpec, c: ValidatedCoefficients) -> np.ndarray:
    """Eigenvalues of the linear symbol over the stored modes, shape (2, n_coeffs).

    Row 0 is the (u+v)/sqrt(2) branch with rate i(2 pi kappa)^3 (1 + a3) - k,
    row 1 the (u-v)/sqrt(2) branch with (1 - a3). Mode 0 is undamped.
    """
    _require_validated(c)
    omega3 = (TWO_PI * np.arange(grid.n_coeffs)) ** 3
    damp = np.full(grid.n_coeffs, c.k)
    damp[0] = 0.0
    return np.stack([1j * omega3 * (1.0 + c.a3) - damp,
                     1j * omega3 * (1.0 - c.a3) - damp])


def rhs(state: SimState, c: ValidatedCoefficients
        ) -> tuple[SpectralField, SpectralField]:
    """Time derivative (du, dv) of the reduced system."""
    _require_validated(c)
    if abs(state.u.coeffs[0]) > 1e-12 or abs(state.v.coeffs[0]) > 1e-12:
        raise ValueError("state is not in reduced (zero-mean) form")
    grid = state.grid
    u_hat = truncate(state.u).coeffs
    v_hat = truncate(state.v).coeffs
    nu, nv = nonlinear_remainder(u_hat, v_hat, state.mean_u, state.mean_v,
                                 c, grid)
    omega = TWO_PI * np.arange(grid.n_coeffs)
    disp = (1j * omega) ** 3
    damp = np.full(grid.n_coeffs, c.k)
    damp[0] = 0.0
    du = nu - disp * (u_hat + c.a3 * v_hat) - damp * u_hat
    dv = nv - disp * (v_hat + c.a3 * u_hat) - damp * v_hat
    return SpectralField(grid, du), SpectralField(grid, dv)


@dataclass(frozen=True)
class LinearSymbol:
    """2x2 symbol of the linearized, mean-free system at one wavenumber."""

    kappa: int
    matrix: np.ndarray        # (2, 2) complex
    eigenvalues: np.ndarray   # (2,), plus branch first
    eigenvectors: np.ndarray  # (2, 2), columns match eigenvalues


def linear_symbol(c: ValidatedCoefficients, kappa: int) -> LinearSymbol:
    _require_validated(c)
    i_omega3 = (1j * TWO_PI * kappa) ** 3
    damp = c.k if kappa != 0 else 0.0
    matrix = -np.array([[i_omega3 + damp, c.a3 * i_omega3],
                        [c.a3 * i_omega3, i_omega3 + damp]])
    eigenvalues = np.array([-i_omega3 * (1.0 + c.a3) - damp,
                            -i_omega3 * (1.0 - c.a3) - damp])
    s = 1.0 / np.sqrt(2.0)
    eigenvectors = np.array([[s, s], [s, -s]], dtype=np.complex128)
    return LinearSymbol(kappa=kappa, matrix=matrix,
                        eigenvalues=eigenvalues, eigenvectors=eigenvectors)
