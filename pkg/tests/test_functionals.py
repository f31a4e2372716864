"""Functionals: oracles, scaling, coercivity, translation invariance."""
import numpy as np
import pytest

from ggkdv import functionals as fn, model, spectral as sp
from ggkdv.model import CoefficientSet

from conftest import make_sine_state


def rich_state(grid, amp=1.0, seed=11):
    """Multi-mode zero-mean state whose cubic functionals do not vanish."""
    rng = np.random.default_rng(seed)
    x = grid.nodes()
    u = amp * (np.sin(2 * np.pi * x) + 0.5 * np.cos(4 * np.pi * x)
               + 0.2 * rng.standard_normal() * np.sin(6 * np.pi * x))
    v = amp * (np.cos(2 * np.pi * x) - 0.3 * np.sin(4 * np.pi * x))
    return model.reduce_mean(sp.from_samples(grid, u), sp.from_samples(grid, v))


class TestEnergyAndSeminorms:
    def test_energy_of_unit_modes(self, grid64, coeffs_coupled):
        st = make_sine_state(grid64, amp=1.0)
        # (1/2)(int sin^2 + int cos^2) = 1/2
        assert fn.energy(st, coeffs_coupled) == pytest.approx(0.5, abs=1e-14)

    def test_seminorm_zero_is_l2_norm_sq(self, grid64):
        st = make_sine_state(grid64, amp=2.0)
        assert fn.hs_seminorm_sq(st, 0) == pytest.approx(4.0, abs=1e-13)

    def test_single_mode_seminorm_ladder(self, grid128):
        # u = A sin(2 pi x): int (d^n u)^2 = A^2 (2 pi)^(2n) / 2
        A = 0.3
        x = grid128.nodes()
        st = model.reduce_mean(
            sp.from_samples(grid128, A * np.sin(2 * np.pi * x)),
            sp.zeros(grid128))
        for n in range(5):
            expect = 0.5 * A ** 2 * (2 * np.pi) ** (2 * n)
            assert fn.hs_seminorm_sq(st, n) == pytest.approx(expect, rel=1e-12)

    def test_seminorm_agrees_with_quadrature_route(self, grid128):
        st = rich_state(grid128)
        for n in range(4):
            un, vn = sp.derivative(st.u, n), sp.derivative(st.v, n)
            direct = sp.inner(un, un) + sp.inner(vn, vn)
            assert fn.hs_seminorm_sq(st, n) == pytest.approx(direct, rel=1e-13)

    def test_negative_order_rejected(self, grid64):
        with pytest.raises(ValueError):
            fn.hs_seminorm_sq(make_sine_state(grid64), -1)


class TestLyapunovH1:
    def test_f1_single_mode_oracle(self, grid128, coeffs_coupled):
        # u = A sin(2 pi x), v = 0: f1 = A^2 (2 pi)^2 / 2, g1 = 0
        A = 0.25
        x = grid128.nodes()
        st = model.reduce_mean(
            sp.from_samples(grid128, A * np.sin(2 * np.pi * x)),
            sp.zeros(grid128))
        f1, g1 = fn.lyapunov_h1(st, coeffs_coupled)
        assert f1 == pytest.approx(0.5 * A ** 2 * (2 * np.pi) ** 2, rel=1e-12)
        assert g1 == pytest.approx(0.0, abs=1e-15)

    def test_g1_dense_quadrature_oracle(self, grid128, coeffs_coupled):
        st = rich_state(grid128)
        m = 4096
        u = sp.padded_samples(st.u, m)
        v = sp.padded_samples(st.v, m)
        c = coeffs_coupled
        expect = float(np.mean(-(u ** 3 + v ** 3) / 3
                               - c.a1 * u * v ** 2 - c.a2 * u ** 2 * v))
        _, g1 = fn.lyapunov_h1(st, c)
        assert g1 == pytest.approx(expect, rel=1e-12)

    def test_f1_coercive_between_sobolev_bounds(self, grid128, coeffs_coupled):
        st = rich_state(grid128)
        f1, _ = fn.lyapunov_h1(st, coeffs_coupled)
        s1 = fn.hs_seminorm_sq(st, 1)
        a3 = abs(coeffs_coupled.a3)
        assert (1 - a3) * s1 - 1e-12 <= f1 <= (1 + a3) * s1 + 1e-12


class TestLyapunovH2:
    def test_f2_matches_seminorm_when_uncoupled(self, grid128, coeffs_uncoupled):
        st = rich_state(grid128)
        f2, _, _ = fn.lyapunov_h2(st, coeffs_uncoupled)
        assert f2 == pytest.approx(fn.hs_seminorm_sq(st, 2), rel=1e-13)

    def test_g2_dense_quadrature_oracle(self, grid128, coeffs_coupled):
        st = rich_state(grid128)
        m = 4096
        c = coeffs_coupled
        u = sp.padded_samples(st.u, m)
        v = sp.padded_samples(st.v, m)
        u1 = sp.padded_samples(sp.derivative(st.u), m)
        v1 = sp.padded_samples(sp.derivative(st.v), m)
        expect = float(np.mean(-(5 / 3) * (
            u1 ** 2 * u + v1 ** 2 * v
            + c.a1 * (2 * u1 * v1 * v + v1 ** 2 * u)
            + c.a2 * (2 * u1 * v1 * u + u1 ** 2 * v))))
        _, g2, _ = fn.lyapunov_h2(st, c)
        assert g2 == pytest.approx(expect, rel=1e-12)

    def test_h2_vanishes_on_both_admissible_branches(
            self, grid128, coeffs_coupled, coeffs_uncoupled):
        st = rich_state(grid128)
        assert fn.lyapunov_h2(st, coeffs_coupled)[2] == 0.0
        assert fn.lyapunov_h2(st, coeffs_uncoupled)[2] == 0.0

    def test_h2_nonzero_outside_the_certified_regime(self, grid128):
        c = model.ValidatedCoefficients.assume_valid(
            CoefficientSet(a1=0.3, a2=0.7, a3=0.4, k=1.0))
        st = rich_state(grid128)
        assert abs(fn.lyapunov_h2(st, c)[2]) > 1e-6


class TestStructure:
    def test_quadratics_scale_quadratically_cubics_cubically(
            self, grid128, coeffs_coupled):
        c = coeffs_coupled
        big, small = rich_state(grid128, amp=1.0), rich_state(grid128, amp=0.5)
        f1b, g1b = fn.lyapunov_h1(big, c)
        f1s, g1s = fn.lyapunov_h1(small, c)
        assert f1b / f1s == pytest.approx(4.0, rel=1e-12)
        assert g1b / g1s == pytest.approx(8.0, rel=1e-10)
        f2b, g2b, _ = fn.lyapunov_h2(big, c)
        f2s, g2s, _ = fn.lyapunov_h2(small, c)
        assert f2b / f2s == pytest.approx(4.0, rel=1e-12)
        assert g2b / g2s == pytest.approx(8.0, rel=1e-10)

    def test_translation_invariance(self, grid128, coeffs_coupled):
        st = rich_state(grid128)
        moved = model.SimState(u=sp.shift(st.u, 0.3), v=sp.shift(st.v, 0.3),
                               t=st.t, mean_u=st.mean_u, mean_v=st.mean_v)
        rec = fn.functional_record(st, coeffs_coupled)
        rec_moved = fn.functional_record(moved, coeffs_coupled)
        for key, val in rec.as_columns().items():
            assert rec_moved.as_columns()[key] == pytest.approx(
                val, rel=1e-10, abs=1e-12), key

    def test_record_column_order(self, grid64, coeffs_coupled):
        rec = fn.functional_record(make_sine_state(grid64), coeffs_coupled,
                                   n_max=2)
        assert list(rec.as_columns()) == [
            "t", "energy", "seminorm_sq_0", "seminorm_sq_1", "seminorm_sq_2",
            "f1", "g1", "f2", "g2", "h2"]
