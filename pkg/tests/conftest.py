import numpy as np
import pytest

from ggkdv import model, spectral as sp


@pytest.fixture
def grid128():
    return sp.make_grid(128)


@pytest.fixture
def grid64():
    return sp.make_grid(64)


@pytest.fixture
def coeffs_coupled():
    """Dispersively coupled branch: 0 < |a3| < 1 forces a1 = a2 = 1."""
    return model.validate_coefficients(
        model.CoefficientSet(a1=1.0, a2=1.0, a3=0.5, k=1.0))


@pytest.fixture
def coeffs_uncoupled():
    """a3 = 0 branch with an asymmetric admissible pair (a1, a2) = (1, 0)."""
    return model.validate_coefficients(
        model.CoefficientSet(a1=1.0, a2=0.0, a3=0.0, k=1.0))


def make_sine_state(grid, amp=0.1, mean_u=0.0, mean_v=0.0):
    x = grid.nodes()
    phi = sp.from_samples(grid, mean_u + amp * np.sin(2 * np.pi * x))
    psi = sp.from_samples(grid, mean_v + amp * np.cos(2 * np.pi * x))
    return model.reduce_mean(phi, psi)
