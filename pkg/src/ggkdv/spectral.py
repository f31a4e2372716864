"""Fourier representation of real periodic fields on the unit interval.

Fields live on a uniform grid of n_points collocation nodes x_j = j/n and are
stored as one-sided rfft coefficient arrays normalized so that coeffs[0] is the
mean and coeffs[kappa] multiplies exp(2*pi*i*kappa*x). Products are formed in
collocation space and truncated at the two-thirds dealiasing cutoff, which makes
every retained mode of a quadratic product exact (aliased images of a product of
two cutoff-limited fields land at |kappa| >= n - 2*cutoff > cutoff).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on [0, 1)."""

    n_points: int
    n_modes: int         # Nyquist index n_points // 2
    dealias_cutoff: int  # highest mode kept by pointwise_product

    @property
    def n_coeffs(self) -> int:
        return self.n_points // 2 + 1

    def nodes(self) -> np.ndarray:
        return np.arange(self.n_points) / self.n_points

    def wavenumbers(self) -> np.ndarray:
        return np.arange(self.n_coeffs)


def make_grid(n_points: int) -> GridSpec:
    if n_points < 8 or n_points % 2 != 0:
        raise ValueError(f"n_points must be even and >= 8, got {n_points}")
    return GridSpec(n_points=n_points, n_modes=n_points // 2,
                    dealias_cutoff=n_points // 3)


@dataclass(frozen=True)
class SpectralField:
    """Immutable real field identified with its trig interpolant."""

    grid: GridSpec
    coeffs: np.ndarray  # complex128, rfft layout, length grid.n_coeffs

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != (self.grid.n_coeffs,):
            raise ValueError(f"coefficient array has shape {c.shape}, "
                             f"expected ({self.grid.n_coeffs},)")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    def samples(self) -> np.ndarray:
        """Values at the collocation nodes."""
        return np.fft.irfft(self.coeffs * self.grid.n_points,
                            n=self.grid.n_points)

    def band(self) -> int:
        """Highest mode index with a nonzero coefficient."""
        nz = np.nonzero(self.coeffs)[0]
        return int(nz[-1]) if nz.size else 0

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _require_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _require_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)


def _require_same_grid(f: SpectralField, g: SpectralField) -> None:
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")


def zeros(grid: GridSpec) -> SpectralField:
    return SpectralField(grid, np.zeros(grid.n_coeffs, dtype=np.complex128))


def from_samples(grid: GridSpec, samples: np.ndarray) -> SpectralField:
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape != (grid.n_points,):
        raise ValueError(f"sample array has shape {samples.shape}, "
                         f"expected ({grid.n_points},)")
    return SpectralField(grid, np.fft.rfft(samples) / grid.n_points)


def from_modes(grid: GridSpec, modes: dict) -> SpectralField:
    """Build a field from {mode index: coefficient}; conjugates are implied."""
    c = np.zeros(grid.n_coeffs, dtype=np.complex128)
    for kappa, value in modes.items():
        if not 0 <= kappa <= grid.n_modes:
            raise ValueError(f"mode {kappa} outside [0, {grid.n_modes}]")
        c[kappa] = value
    return SpectralField(grid, c)


def derivative(f: SpectralField, order: int = 1) -> SpectralField:
    if order < 0:
        raise ValueError("derivative order must be >= 0")
    if order == 0:
        return f
    omega = TWO_PI * f.grid.wavenumbers()
    c = f.coeffs * (1j * omega) ** order
    if order % 2 == 1:
        # odd derivative of a real field has no consistent Nyquist content
        c[-1] = 0.0
    return SpectralField(f.grid, c)


def integral(f: SpectralField) -> float:
    """Integral over [0, 1), i.e. the mean coefficient."""
    return float(f.coeffs[0].real)


def _parseval_weights(n_coeffs: int) -> np.ndarray:
    w = np.full(n_coeffs, 2.0)
    w[0] = 1.0
    w[-1] = 1.0  # Nyquist coefficient of an even-length rfft is unpaired
    return w


def inner(f: SpectralField, g: SpectralField) -> float:
    """Exact integral of f*g over [0, 1) via the coefficient pairing."""
    _require_same_grid(f, g)
    w = _parseval_weights(f.grid.n_coeffs)
    return float(np.sum(w * (f.coeffs * np.conj(g.coeffs)).real))


def pointwise_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Collocation product, truncated at the dealiasing cutoff."""
    _require_same_grid(f, g)
    n = f.grid.n_points
    prod = f.samples() * g.samples()
    c = np.fft.rfft(prod) / n
    c[f.grid.dealias_cutoff + 1:] = 0.0
    return SpectralField(f.grid, c)


def truncate(f: SpectralField, cutoff: int | None = None) -> SpectralField:
    """Zero every mode above the cutoff (defaults to the grid's)."""
    if cutoff is None:
        cutoff = f.grid.dealias_cutoff
    c = f.coeffs.copy()
    c[cutoff + 1:] = 0.0
    return SpectralField(f.grid, c)


def shift(f: SpectralField, s: float) -> SpectralField:
    """Translate: shift(f, s)(x) = f(x + s)."""
    phase = np.exp(1j * TWO_PI * f.grid.wavenumbers() * s)
    return SpectralField(f.grid, f.coeffs * phase)


def _next_pow2(m: int) -> int:
    return 1 << (m - 1).bit_length()


def padded_samples(f: SpectralField, m: int) -> np.ndarray:
    """Values of the trig interpolant on a finer uniform grid of m points."""
    if m < 2 * f.band() + 2 and f.band() > 0:
        raise ValueError("target grid too coarse for this field's band")
    c = np.zeros(m // 2 + 1, dtype=np.complex128)
    b = f.band()
    c[:b + 1] = f.coeffs[:b + 1]
    return np.fft.irfft(c * m, n=m)


def integral_of_product(*fields: SpectralField) -> float:
    """Exact integral of a pointwise product of trig interpolants.

    Each factor is resampled on a grid fine enough that the full product is
    alias-free, so the returned quadrature mean equals the true integral to
    rounding error.
    """
    if not fields:
        raise ValueError("need at least one field")
    grid = fields[0].grid
    for f in fields[1:]:
        _require_same_grid(fields[0], f)
    if len(fields) == 1:
        return integral(fields[0])
    if len(fields) == 2:
        return inner(fields[0], fields[1])
    bands = [f.band() for f in fields]
    m = _next_pow2(max(sum(bands) + 1, 2 * max(bands) + 2, 8))
    prod = padded_samples(fields[0], m)
    for f in fields[1:]:
        prod = prod * padded_samples(f, m)
    return float(np.mean(prod))
