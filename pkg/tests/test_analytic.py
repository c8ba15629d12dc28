import math

import numpy as np
import pytest

from horizon_fuse.analytic import (
    Ar1Params,
    attentive_law,
    error_autocorr,
    error_variance,
    gain_point,
    gain_surface,
    inattentive_law,
    joint_law,
    msfe_ratio,
)
from horizon_fuse.copula import pit_corr_from_gaussian, pit_corr_theoretical
from horizon_fuse.errors import DataError


class TestErrorVariance:
    def test_white_noise(self):
        p = Ar1Params(rho=0.0, sigma_eps=1.3)
        for h in (1, 2, 5):
            assert error_variance(p, h) == pytest.approx(1.3**2)

    def test_one_step(self):
        p = Ar1Params(rho=0.6, sigma_eps=0.7)
        assert error_variance(p, 1) == pytest.approx(0.49)

    def test_hand_arithmetic(self):
        p = Ar1Params(rho=0.5, sigma_eps=1.0)
        assert error_variance(p, 2) == pytest.approx(1.25)

    def test_long_horizon_limit(self):
        p = Ar1Params(rho=0.8)
        assert error_variance(p, 500) == pytest.approx(1 / (1 - 0.64), rel=1e-10)


class TestErrorAutocorr:
    def test_white_noise(self):
        assert error_autocorr(Ar1Params(rho=0.0), h=3, k=1) == 0.0

    def test_hand_arithmetic(self):
        v = error_autocorr(Ar1Params(rho=0.6), h=2, k=1)
        assert v == pytest.approx(0.6 * math.sqrt(1 / 1.36), abs=1e-5)
        assert v == pytest.approx(0.51450, abs=1e-5)

    def test_continuity_near_unit_root(self):
        a = error_autocorr(Ar1Params(rho=0.999), h=4, k=1)
        b = error_autocorr(Ar1Params(rho=0.9999), h=4, k=1)
        assert abs(a - b) < 0.01
        assert -1 <= a <= 1

    def test_invalid_lags_rejected(self):
        with pytest.raises(DataError):
            error_autocorr(Ar1Params(rho=0.5), h=2, k=2)


class TestPredictiveLaws:
    def test_no_dependence_variance(self):
        p = Ar1Params(rho=0.0, sigma_eps=1.0)
        w = (0.5, 1.0, 2.0)
        att = attentive_law(p, w, y_t=3.0)
        assert att.mu == pytest.approx(0.0)
        assert att.sigma**2 == pytest.approx(0.25 + 1.0 + 4.0)

    def test_unit_weight_variance(self):
        p = Ar1Params(rho=0.5, sigma_eps=1.0)
        att = attentive_law(p, (1.0, 1.0), y_t=0.0)
        assert att.sigma**2 == pytest.approx(3.25)

    def test_single_horizon(self):
        p = Ar1Params(rho=0.4, sigma_eps=2.0)
        att = attentive_law(p, (1.5,), y_t=2.0)
        assert att.mu == pytest.approx(1.5 * 0.4 * 2.0)
        assert att.sigma**2 == pytest.approx(4.0 * 1.5**2)

    def test_inattentive_variance(self):
        p = Ar1Params(rho=0.5, sigma_eps=1.0)
        inn = inattentive_law(p, (1.0, 1.0), y_t=0.0)
        assert inn.sigma**2 == pytest.approx(2.25)

    def test_laws_coincide_without_dependence(self):
        p = Ar1Params(rho=0.0, sigma_eps=1.0)
        w = (0.3, 0.7, 1.1)
        att = attentive_law(p, w, y_t=1.0)
        inn = inattentive_law(p, w, y_t=1.0)
        assert att.mu == pytest.approx(inn.mu)
        assert att.sigma == pytest.approx(inn.sigma)

    def test_means_always_equal(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            p = Ar1Params(rho=float(rng.uniform(-0.9, 0.9)))
            w = tuple(rng.standard_normal(4))
            y = float(rng.standard_normal())
            assert attentive_law(p, w, y).mu == pytest.approx(
                inattentive_law(p, w, y).mu, abs=1e-12)

    def test_variance_dominance(self):
        for rho in (0.2, 0.5, 0.8):
            p = Ar1Params(rho=rho)
            att = attentive_law(p, (1.0,) * 6, y_t=0.0)
            inn = inattentive_law(p, (1.0,) * 6, y_t=0.0)
            assert att.sigma > inn.sigma


class TestJointLaw:
    def test_white_noise(self):
        mean, cov = joint_law(Ar1Params(rho=0.0, sigma_eps=1.5), h=3, y_t=2.0)
        np.testing.assert_allclose(mean, 0.0)
        np.testing.assert_allclose(cov, 2.25 * np.eye(3))

    def test_unit_weight_sum_matches_attentive(self):
        p = Ar1Params(rho=0.5)
        mean, cov = joint_law(p, h=2, y_t=0.0)
        assert np.ones(2) @ cov @ np.ones(2) == pytest.approx(3.25)

    def test_diagonal_matches_error_variance(self):
        p = Ar1Params(rho=0.7, sigma_eps=0.8)
        _, cov = joint_law(p, h=5, y_t=0.0)
        for h in range(1, 6):
            assert cov[h - 1, h - 1] == pytest.approx(error_variance(p, h))

    def test_weighted_aggregation_matches_attentive(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            p = Ar1Params(rho=float(rng.uniform(-0.9, 0.9)))
            h = int(rng.integers(2, 7))
            w = rng.standard_normal(h)
            y = float(rng.standard_normal())
            mean, cov = joint_law(p, h, y)
            att = attentive_law(p, w, y)
            assert w @ mean == pytest.approx(att.mu, abs=1e-12)
            assert w @ cov @ w == pytest.approx(att.sigma**2, abs=1e-10)

    def test_psd(self):
        _, cov = joint_law(Ar1Params(rho=0.9), h=8, y_t=0.0)
        assert np.linalg.eigvalsh(cov).min() > 0


class TestPitCorrConsistency:
    def test_composition_matches_error_autocorr(self):
        for rho in (0.3, 0.6, -0.4):
            p = Ar1Params(rho=rho)
            for h, k in ((2, 1), (4, 1), (6, 3)):
                direct = pit_corr_theoretical(rho, h, k)
                composed = pit_corr_from_gaussian(error_autocorr(p, h, k))
                assert direct == pytest.approx(composed, abs=1e-12)


class TestMsfeRatio:
    def test_zero_rho_one_year(self):
        assert msfe_ratio(Ar1Params(rho=1e-12), "one_year") == pytest.approx(
            5 / 6, abs=1e-9)

    def test_zero_rho_two_year(self):
        assert msfe_ratio(Ar1Params(rho=1e-12), "two_year") == pytest.approx(
            1.0, abs=1e-9)

    def test_range_for_moderate_persistence(self):
        # at rho = 0.7 the printed polynomial gives 8.29/14.54 = 0.5702,
        # i.e. 0.6 at the one-decimal precision of the published range
        assert msfe_ratio(Ar1Params(rho=0.7), "one_year") == pytest.approx(
            8.29 / 14.54, abs=1e-10)
        for rho in np.linspace(0.1, 0.7, 13):
            v = msfe_ratio(Ar1Params(rho=float(rho)), "one_year")
            assert 0.6 <= round(v, 1) <= 0.8

    def test_one_year_below_one_on_grid(self):
        for rho in np.linspace(-0.99, 0.99, 199):
            assert msfe_ratio(Ar1Params(rho=float(rho)), "one_year") < 1.0

    def test_unknown_case_rejected(self):
        with pytest.raises(DataError):
            msfe_ratio(Ar1Params(rho=0.5), "three_year")


class TestGainSurface:
    def test_zero_rho_gains_vanish(self):
        pt = gain_point(Ar1Params(rho=0.0), h=6, n_rep=100_000, seed=0)
        assert abs(pt.crps_gain_pct) < 0.5
        assert abs(pt.qwcrps_gain_pct) < 0.5
        assert abs(pt.qs10_gain_pct) < 0.5

    def test_surface_shape_and_determinism(self):
        pts1 = gain_surface([0.3, 0.6], [4, 8], n_rep=20_000, seed=3)
        pts2 = gain_surface([0.3, 0.6], [4, 8], n_rep=20_000, seed=3)
        assert len(pts1) == 4
        for a, b in zip(pts1, pts2):
            assert a == b

    def test_positive_gains_under_persistence(self):
        pt = gain_point(Ar1Params(rho=0.6), h=12, n_rep=50_000, seed=4)
        assert pt.crps_gain_pct > 3.0
        assert pt.qwcrps_gain_pct > pt.crps_gain_pct
