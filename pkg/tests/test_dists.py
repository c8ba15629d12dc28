import math

import numpy as np
import pytest
from scipy import integrate, stats

from horizon_fuse.dists import (
    NormalParams,
    QuantileGrid,
    SkewShapeParams,
    calibrate_skew_shape,
    cdf,
    dist_mean,
    dist_sd,
    fit_skewt_to_quantiles,
    grid_from_json,
    grid_to_json,
    interp_cdf,
    interp_sample,
    pdf,
    quantile,
    repair_crossing,
    sample,
)
from horizon_fuse.errors import DataError, FitError


IDENTITY_GRID = QuantileGrid(levels=tuple(np.arange(1, 100) / 100.0),
                             values=tuple(np.arange(1, 100) / 100.0))


class TestCdf:
    def test_normal_center(self):
        assert cdf(NormalParams(0.0, 1.0), 0.0) == pytest.approx(0.5)

    def test_normal_shifted_center(self):
        assert cdf(NormalParams(2.0, 3.0), 2.0) == pytest.approx(0.5)

    def test_negative_skew_puts_mass_below_location(self):
        d = SkewShapeParams(xi=0.0, omega=1.0, alpha=-3.0, nu=8.0)
        value = cdf(d, 0.0)
        assert value > 0.5
        # independent oracle: integrate the pdf up to the location
        oracle, err = integrate.quad(lambda z: pdf(d, z), -np.inf, 0.0)
        assert err < 1e-6
        assert value == pytest.approx(oracle, abs=1e-7)

    def test_monotone_in_y(self):
        d = SkewShapeParams(xi=0.5, omega=2.0, alpha=-3.0, nu=8.0)
        ys = np.linspace(-8, 8, 41)
        vals = [cdf(d, y) for y in ys]
        assert np.all(np.diff(vals) >= 0)
        assert all(0.0 <= v <= 1.0 for v in vals)

    def test_non_finite_y_rejected(self):
        with pytest.raises(DataError):
            cdf(NormalParams(0.0, 1.0), float("nan"))

    def test_skew_normal_matches_scipy(self):
        d = SkewShapeParams(xi=0.3, omega=1.4, alpha=-3.0, nu=math.inf)
        for y in (-1.0, 0.0, 2.0):
            assert cdf(d, y) == pytest.approx(
                stats.skewnorm.cdf(y, -3.0, loc=0.3, scale=1.4), abs=1e-10)


class TestQuantile:
    def test_normal_median(self):
        assert quantile(NormalParams(0.0, 1.0), 0.5) == pytest.approx(0.0, abs=1e-12)

    def test_normal_upper_tail(self):
        assert quantile(NormalParams(0.0, 1.0), 0.975) == pytest.approx(
            1.959964, abs=1e-6)

    def test_grid_midpoint(self):
        g = QuantileGrid(levels=(0.25, 0.75), values=(1.0, 3.0))
        assert quantile(g, 0.5) == pytest.approx(2.0)

    def test_out_of_range_p_rejected(self):
        for p in (0.0, 1.0, -0.1, 1.1):
            with pytest.raises(DataError):
                quantile(NormalParams(0.0, 1.0), p)

    def test_roundtrip_normal(self):
        d = NormalParams(1.3, 0.7)
        for p in (0.01, 0.2, 0.5, 0.9, 0.99):
            assert cdf(d, quantile(d, p)) == pytest.approx(p, abs=1e-10)

    def test_roundtrip_skewt(self):
        d = SkewShapeParams(xi=-0.4, omega=1.1, alpha=-3.0, nu=8.0)
        for p in (0.05, 0.25, 0.5, 0.75, 0.95):
            assert cdf(d, quantile(d, p)) == pytest.approx(p, abs=1e-8)


class TestInterpCdf:
    def test_identity_grid(self):
        assert interp_cdf(IDENTITY_GRID, 0.37) == pytest.approx(0.37, abs=1e-12)

    def test_linear_midpoint(self):
        g = QuantileGrid(levels=(0.25, 0.75), values=(1.0, 3.0))
        assert interp_cdf(g, 2.0) == pytest.approx(0.5)

    def test_endpoint_slope_clamped(self):
        g = QuantileGrid(levels=(0.25, 0.75), values=(1.0, 3.0))
        # slope 0.25 per unit below the first knot: 0.25 + 0.25*(0-1) = 0
        assert interp_cdf(g, 0.0) == pytest.approx(0.0)

    def test_exact_at_knots(self):
        g = QuantileGrid(levels=(0.1, 0.4, 0.9), values=(-1.0, 0.5, 4.0))
        for lv, v in zip(g.levels, g.values):
            assert interp_cdf(g, v) == pytest.approx(lv, abs=1e-12)

    def test_monotone(self):
        g = QuantileGrid(levels=(0.1, 0.4, 0.9), values=(-1.0, 0.5, 4.0))
        ys = np.linspace(-3, 7, 101)
        vals = [interp_cdf(g, y) for y in ys]
        assert np.all(np.diff(vals) >= -1e-15)

    def test_atom_is_right_continuous_step(self):
        g = repair_crossing((0.2, 0.5, 0.8), (1.0, 1.0, 3.0))
        assert interp_cdf(g, 1.0) == pytest.approx(0.5)
        assert interp_cdf(g, 1.0 - 1e-9) < 0.5


class TestInterpSample:
    def test_identity_grid(self):
        assert interp_sample(IDENTITY_GRID, 0.42) == pytest.approx(0.42, abs=1e-12)

    def test_grid_point(self):
        g = QuantileGrid(levels=(0.25, 0.75), values=(1.0, 3.0))
        assert interp_sample(g, 0.75) == pytest.approx(3.0)

    def test_endpoint_extrapolation(self):
        g = QuantileGrid(levels=(0.25, 0.75), values=(1.0, 3.0))
        # last interior slope is (3-1)/0.5 = 4 per unit probability
        assert interp_sample(g, 0.9) == pytest.approx(3.6)

    def test_roundtrip_within_grid(self):
        g = QuantileGrid(levels=(0.1, 0.4, 0.9), values=(-1.0, 0.5, 4.0))
        for u in (0.1, 0.2, 0.4, 0.6, 0.9):
            assert interp_cdf(g, interp_sample(g, u)) == pytest.approx(u, abs=1e-12)


class TestRepairCrossing:
    def test_sorts_crossed_values(self):
        g = repair_crossing((0.25, 0.5, 0.75), (2.0, 1.0, 3.0))
        assert tuple(g.values) == (1.0, 2.0, 3.0)

    def test_sorted_input_unchanged(self):
        g = repair_crossing((0.25, 0.5, 0.75), (1.0, 2.0, 3.0))
        assert tuple(g.values) == (1.0, 2.0, 3.0)

    def test_equal_values_unchanged(self):
        g = repair_crossing((0.25, 0.5, 0.75), (2.0, 2.0, 2.0))
        assert tuple(g.values) == (2.0, 2.0, 2.0)

    def test_multiset_preserved(self):
        rng = np.random.default_rng(0)
        vals = rng.standard_normal(9)
        g = repair_crossing(tuple(np.arange(1, 10) / 10.0), tuple(vals))
        assert sorted(g.values.tolist()) == sorted(vals.tolist())
        assert np.all(np.diff(g.values) >= 0)


class TestFitSkewtToQuantiles:
    LEVELS = (0.05, 0.25, 0.5, 0.75, 0.95)

    def test_recovers_normal_quantiles(self):
        values = stats.norm.ppf(self.LEVELS)
        fit = fit_skewt_to_quantiles(self.LEVELS, values)
        refit = [quantile(fit, p) for p in self.LEVELS]
        assert np.max(np.abs(np.array(refit) - values)) < 1e-3

    def test_self_consistency(self):
        d = SkewShapeParams(xi=1.0, omega=2.0, alpha=-3.0, nu=8.0)
        values = [quantile(d, p) for p in self.LEVELS]
        fit = fit_skewt_to_quantiles(self.LEVELS, values)
        refit = [quantile(fit, p) for p in self.LEVELS]
        assert np.max(np.abs(np.array(refit) - np.array(values))) < 1e-3

    def test_degenerate_quantiles_error(self):
        with pytest.raises(FitError):
            fit_skewt_to_quantiles(self.LEVELS, (1.0,) * 5)

    def test_deterministic(self):
        values = stats.norm.ppf(self.LEVELS, loc=0.5, scale=1.5)
        a = fit_skewt_to_quantiles(self.LEVELS, values)
        b = fit_skewt_to_quantiles(self.LEVELS, values)
        assert (a.xi, a.omega, a.alpha, a.nu) == (b.xi, b.omega, b.alpha, b.nu)


class TestSample:
    def test_normal_mean(self):
        rng = np.random.default_rng(7)
        x = sample(NormalParams(0.0, 1.0), rng, 100_000)
        assert abs(x.mean()) < 0.02

    def test_identity_grid_uniform(self):
        rng = np.random.default_rng(8)
        x = sample(IDENTITY_GRID, rng, 100_000)
        stat = stats.kstest(x, "uniform").statistic
        assert stat < 0.02

    def test_calibrated_skewt_sd(self):
        d = calibrate_skew_shape(alpha=-3.0, nu=8.0, sd=0.5)
        rng = np.random.default_rng(9)
        x = sample(d, rng, 100_000)
        assert abs(x.std(ddof=1) - 0.5) < 0.02
        assert abs(x.mean()) < 0.02
        assert stats.skew(x) < 0.0

    def test_empirical_cdf_matches(self):
        d = SkewShapeParams(xi=0.0, omega=1.0, alpha=-3.0, nu=8.0)
        rng = np.random.default_rng(10)
        x = np.sort(sample(d, rng, 100_000))
        u = np.array([cdf(d, v) for v in x[:: 500]])
        emp = (np.arange(len(x)) / len(x))[:: 500]
        assert np.max(np.abs(u - emp)) < 0.02


class TestCalibration:
    @pytest.mark.parametrize("nu", [8.0, math.inf])
    def test_moments_match_target(self, nu):
        d = calibrate_skew_shape(alpha=-3.0, nu=nu, sd=0.5)
        if math.isinf(nu):
            mean = stats.skewnorm.mean(-3.0, loc=d.xi, scale=d.omega)
            sd = stats.skewnorm.std(-3.0, loc=d.xi, scale=d.omega)
        else:
            mean, err = integrate.quad(lambda z: z * pdf(d, z), -np.inf, np.inf)
            m2, _ = integrate.quad(lambda z: z * z * pdf(d, z), -np.inf, np.inf)
            sd = math.sqrt(m2 - mean**2)
        assert mean == pytest.approx(0.0, abs=1e-8)
        assert sd == pytest.approx(0.5, abs=1e-7)


class TestGridMoments:
    def test_mean_and_sd_of_identity_grid(self):
        assert dist_mean(IDENTITY_GRID) == pytest.approx(0.5, abs=1e-3)
        assert dist_sd(IDENTITY_GRID) == pytest.approx(1 / math.sqrt(12), abs=1e-3)

    def test_normal_closed_forms(self):
        d = NormalParams(1.5, 2.5)
        assert dist_mean(d) == 1.5
        assert dist_sd(d) == 2.5


class TestSerialization:
    def test_grid_roundtrip(self):
        g = QuantileGrid(levels=(0.1, 0.5, 0.9), values=(-1.0, 0.0, 2.0))
        g2 = grid_from_json(grid_to_json(g))
        np.testing.assert_array_equal(g2.levels, g.levels)
        np.testing.assert_array_equal(g2.values, g.values)

    def test_invalid_grids_rejected(self):
        with pytest.raises(DataError):
            QuantileGrid(levels=(0.5, 0.25), values=(1.0, 2.0))
        with pytest.raises(DataError):
            QuantileGrid(levels=(0.25, 0.75), values=(3.0, 1.0))
        with pytest.raises(DataError):
            QuantileGrid(levels=(0.5,), values=(1.0,))
