"""Univariate predictive distributions.

Normal, Skew-Normal, and Skew-t laws in a location-scale-shape
parameterization, plus piecewise-linear quantile-grid densities. Every
distribution exposes pdf, cdf, quantile, and sampling; the Skew-t can be
fitted to a small set of predicted quantiles (quantile smoothing).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special, stats

from .errors import DataError, FitError

__all__ = [
    "NormalParams",
    "SkewShapeParams",
    "QuantileGrid",
    "pdf",
    "cdf",
    "quantile",
    "sample",
    "dist_mean",
    "dist_sd",
    "interp_cdf",
    "interp_sample",
    "repair_crossing",
    "fit_skewt_to_quantiles",
    "calibrate_skew_shape",
    "grid_to_json",
    "grid_from_json",
]


@dataclass(frozen=True)
class NormalParams:
    """Normal predictive density with location mu and scale sigma.

    sigma == 0 is allowed and marks a degenerate (point-mass) forecast.
    """

    mu: float
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.mu) and np.isfinite(self.sigma)):
            raise DataError("Normal parameters must be finite")
        if self.sigma < 0:
            raise DataError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class SkewShapeParams:
    """Skew-t (or Skew-Normal when nu is infinite) in location-scale-shape form.

    xi: location, omega: scale > 0, alpha: shape, nu: degrees of freedom
    (> 2 when finite so that the variance exists; math.inf selects the
    Skew-Normal limit).
    """

    xi: float
    omega: float
    alpha: float
    nu: float = math.inf

    def __post_init__(self):
        if not (np.isfinite(self.xi) and np.isfinite(self.omega) and np.isfinite(self.alpha)):
            raise DataError("xi, omega, alpha must be finite")
        if self.omega <= 0:
            raise DataError(f"omega must be > 0, got {self.omega}")
        if not (self.nu > 2):
            raise DataError(f"nu must be > 2 (or inf), got {self.nu}")

    @property
    def is_skew_normal(self) -> bool:
        return math.isinf(self.nu)


class QuantileGrid:
    """Predictive density given by sorted (level, value) pairs.

    Linear interpolation between knots; endpoint segments are extrapolated
    with the first/last interior slope. Duplicate values (atoms created by
    crossing repair) are handled as right-continuous steps in the CDF.
    """

    def __init__(self, levels, values):
        levels = np.asarray(levels, dtype=float)
        values = np.asarray(values, dtype=float)
        if levels.ndim != 1 or levels.shape != values.shape:
            raise DataError("levels and values must be 1-d and of equal length")
        if len(levels) < 2:
            raise DataError("need at least 2 quantile pairs")
        if np.any(np.diff(levels) <= 0):
            raise DataError("levels must be strictly increasing")
        if levels[0] <= 0 or levels[-1] >= 1:
            raise DataError("levels must lie in (0, 1)")
        if np.any(np.diff(values) < 0):
            raise DataError("values must be non-decreasing (use repair_crossing)")
        self.levels = levels
        self.values = values

    def __len__(self):
        return len(self.levels)

    def __repr__(self):
        return f"QuantileGrid({len(self)} knots, [{self.values[0]:g}, {self.values[-1]:g}])"


# ---------------------------------------------------------------------------
# Skew-t numerics (standardized: location 0, scale 1)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(256)


def _t_pdf(z, nu):
    z = np.asarray(z, dtype=float)
    logc = special.gammaln((nu + 1.0) / 2.0) - special.gammaln(nu / 2.0) \
        - 0.5 * np.log(nu * np.pi)
    return np.exp(logc - (nu + 1.0) / 2.0 * np.log1p(z * z / nu))


def _skewt_pdf_std(z, alpha, nu):
    z = np.asarray(z, dtype=float)
    arg = alpha * z * np.sqrt((nu + 1.0) / (nu + z * z))
    return 2.0 * _t_pdf(z, nu) * special.stdtr(nu + 1.0, arg)


def _skewt_cdf_lower(z, alpha, nu):
    """Integral of the standardized pdf over (-inf, z], z <= 0 preferred."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    lo = -np.pi / 2.0
    hi = np.arctan(z)
    half = (hi - lo) / 2.0
    mid = (hi + lo) / 2.0
    u = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    x = np.tan(u)
    integrand = _skewt_pdf_std(x, alpha, nu) * (1.0 + x * x)
    return half * (integrand * _GL_WEIGHTS[None, :]).sum(axis=1)


def _skewt_cdf_std(z, alpha, nu):
    z = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty_like(z)
    neg = z <= 0
    if neg.any():
        out[neg] = _skewt_cdf_lower(z[neg], alpha, nu)
    if (~neg).any():
        # mirror identity: F(z; a) = 1 - F(-z; -a)
        out[~neg] = 1.0 - _skewt_cdf_lower(-z[~neg], -alpha, nu)
    return np.clip(out, 0.0, 1.0)


def _skewt_ppf_std_scalar(p, alpha, nu):
    lo, hi = -1.0, 1.0
    while _skewt_cdf_std(lo, alpha, nu)[0] > p:
        lo *= 2.0
        if lo < -1e9:
            break
    while _skewt_cdf_std(hi, alpha, nu)[0] < p:
        hi *= 2.0
        if hi > 1e9:
            break
    return optimize.brentq(
        lambda z: _skewt_cdf_std(z, alpha, nu)[0] - p, lo, hi, xtol=1e-12, rtol=1e-14
    )


def _skewt_quantiles_std_grid(levels, alpha, nu, n_grid=4001, span=80.0):
    """Fast approximate standardized quantiles via inverse interpolation.

    One cumulative-trapezoid pass over a tan-spaced grid; used inside the
    fitting objective and vectorized sampling where thousands of
    evaluations are needed. The public quantile() uses exact root-finding.
    """
    u = np.linspace(-math.atan(span), math.atan(span), n_grid)
    z = np.tan(u)
    integrand = _skewt_pdf_std(z, alpha, nu) * (1.0 + z * z)
    c = np.concatenate(([0.0], np.cumsum(
        0.5 * (integrand[1:] + integrand[:-1]) * np.diff(u))))
    total = c[-1]
    if total > 0:
        c = c / total
    c = np.maximum.accumulate(c)
    return np.interp(levels, c, z)


def _skew_delta(alpha):
    return alpha / math.sqrt(1.0 + alpha * alpha)


def _skew_std_moments(alpha, nu):
    """(mean, sd) of the standardized (xi=0, omega=1) skew law."""
    delta = _skew_delta(alpha)
    if math.isinf(nu):
        b = math.sqrt(2.0 / math.pi)
        m = b * delta
        v = 1.0 - m * m
    else:
        b = math.sqrt(nu / math.pi) * math.exp(
            special.gammaln((nu - 1.0) / 2.0) - special.gammaln(nu / 2.0)
        )
        m = b * delta
        v = nu / (nu - 2.0) - m * m
    return m, math.sqrt(v)


def calibrate_skew_shape(alpha, nu, sd, mean=0.0):
    """Solve for (xi, omega) so the law has the given mean and sd."""
    if sd <= 0:
        raise DataError("sd must be > 0")
    m_std, s_std = _skew_std_moments(alpha, nu)
    omega = sd / s_std
    xi = mean - omega * m_std
    return SkewShapeParams(xi=xi, omega=omega, alpha=alpha, nu=nu)


# ---------------------------------------------------------------------------
# Common dispatch

def _check_finite(y):
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise DataError("evaluation point must be finite")
    return y


def pdf(dist, y):
    y = _check_finite(y)
    if isinstance(dist, NormalParams):
        if dist.sigma == 0:
            raise DataError("pdf undefined for a degenerate Normal")
        z = (y - dist.mu) / dist.sigma
        return np.exp(-0.5 * z * z) / (dist.sigma * math.sqrt(2 * math.pi))
    if isinstance(dist, SkewShapeParams):
        z = (y - dist.xi) / dist.omega
        if dist.is_skew_normal:
            return stats.skewnorm.pdf(z, dist.alpha) / dist.omega
        return _skewt_pdf_std(z, dist.alpha, dist.nu) / dist.omega
    raise TypeError(f"unsupported distribution type {type(dist)!r}")


def cdf(dist, y):
    """Predictive CDF evaluated at y (scalar or array)."""
    y = _check_finite(y)
    scalar = np.ndim(y) == 0
    if isinstance(dist, NormalParams):
        if dist.sigma == 0:
            out = (np.atleast_1d(y) >= dist.mu).astype(float)
        else:
            out = special.ndtr((np.atleast_1d(y) - dist.mu) / dist.sigma)
    elif isinstance(dist, SkewShapeParams):
        z = (np.atleast_1d(y) - dist.xi) / dist.omega
        if dist.is_skew_normal:
            out = stats.skewnorm.cdf(z, dist.alpha)
        else:
            out = _skewt_cdf_std(z, dist.alpha, dist.nu)
    elif isinstance(dist, QuantileGrid):
        out = np.atleast_1d(interp_cdf(dist, y))
    else:
        raise TypeError(f"unsupported distribution type {type(dist)!r}")
    return float(out[0]) if scalar else out


def quantile(dist, p):
    """Inverse CDF at probability p in (0, 1) (scalar or array)."""
    p = np.asarray(p, dtype=float)
    scalar = p.ndim == 0
    pa = np.atleast_1d(p)
    if np.any((pa <= 0) | (pa >= 1)):
        raise DataError("probability must lie strictly inside (0, 1)")
    if isinstance(dist, NormalParams):
        out = dist.mu + dist.sigma * special.ndtri(pa)
    elif isinstance(dist, SkewShapeParams):
        if dist.is_skew_normal:
            out = dist.xi + dist.omega * stats.skewnorm.ppf(pa, dist.alpha)
        else:
            out = dist.xi + dist.omega * np.array(
                [_skewt_ppf_std_scalar(pi, dist.alpha, dist.nu) for pi in pa]
            )
    elif isinstance(dist, QuantileGrid):
        out = np.atleast_1d(interp_sample(dist, p))
    else:
        raise TypeError(f"unsupported distribution type {type(dist)!r}")
    return float(out[0]) if scalar else out


def quantile_vec(dist, p):
    """Vectorized quantile; for the Skew-t a dense inverse-interpolation
    table replaces per-point root finding (used by joint sampling)."""
    p = np.asarray(p, dtype=float)
    if isinstance(dist, SkewShapeParams) and not dist.is_skew_normal:
        lv = np.clip(p, 1e-9, 1 - 1e-9)
        zs = _skewt_quantiles_std_grid(lv.ravel(), dist.alpha, dist.nu)
        return dist.xi + dist.omega * zs.reshape(p.shape)
    return quantile(dist, p)


def sample(dist, rng, n):
    """Draw n values using the caller-owned numpy Generator."""
    if n < 1:
        raise DataError("n must be >= 1")
    if isinstance(dist, NormalParams):
        return dist.mu + dist.sigma * rng.standard_normal(n)
    if isinstance(dist, SkewShapeParams):
        delta = _skew_delta(dist.alpha)
        z0 = rng.standard_normal(n)
        z1 = rng.standard_normal(n)
        sn = delta * np.abs(z0) + math.sqrt(1.0 - delta * delta) * z1
        if dist.is_skew_normal:
            z = sn
        else:
            w = rng.chisquare(dist.nu, size=n) / dist.nu
            z = sn / np.sqrt(w)
        return dist.xi + dist.omega * z
    if isinstance(dist, QuantileGrid):
        u = rng.uniform(size=n)
        return interp_sample(dist, u)
    raise TypeError(f"unsupported distribution type {type(dist)!r}")


def dist_mean(dist):
    if isinstance(dist, NormalParams):
        return dist.mu
    if isinstance(dist, SkewShapeParams):
        m, _ = _skew_std_moments(dist.alpha, dist.nu)
        return dist.xi + dist.omega * m
    if isinstance(dist, QuantileGrid):
        # midpoint quadrature of the quantile function over (0, 1)
        u = (np.arange(100_000) + 0.5) / 100_000
        return float(np.mean(interp_sample(dist, u)))
    raise TypeError(f"unsupported distribution type {type(dist)!r}")


def dist_sd(dist):
    if isinstance(dist, NormalParams):
        return dist.sigma
    if isinstance(dist, SkewShapeParams):
        _, s = _skew_std_moments(dist.alpha, dist.nu)
        return dist.omega * s
    if isinstance(dist, QuantileGrid):
        u = (np.arange(100_000) + 0.5) / 100_000
        x = interp_sample(dist, u)
        return float(np.std(x))
    raise TypeError(f"unsupported distribution type {type(dist)!r}")


# ---------------------------------------------------------------------------
# Quantile-grid interpolation

def _edge_slopes(grid):
    lv, v = grid.levels, grid.values
    dv = np.diff(v)
    dl = np.diff(lv)
    pos = np.nonzero(dv > 0)[0]
    if len(pos) == 0:
        # single atom: infinite density, slopes degenerate
        return math.inf, math.inf
    first = dl[pos[0]] / dv[pos[0]]
    last = dl[pos[-1]] / dv[pos[-1]]
    return first, last


def interp_cdf(grid, y):
    """Piecewise-linear CDF of a quantile grid, clamped to [0, 1].

    Outside the knot range the first/last interior slope is extended.
    Duplicate values (atoms) become right-continuous steps.
    """
    y = _check_finite(y)
    scalar = np.ndim(y) == 0
    ya = np.atleast_1d(np.asarray(y, dtype=float))
    lv, v = grid.levels, grid.values
    s_lo, s_hi = _edge_slopes(grid)
    out = np.empty_like(ya)

    below = ya < v[0]
    above = ya > v[-1]
    inner = ~(below | above)
    if below.any():
        out[below] = lv[0] + (0.0 if math.isinf(s_lo) else s_lo) * (ya[below] - v[0])
    if above.any():
        out[above] = lv[-1] + (0.0 if math.isinf(s_hi) else s_hi) * (ya[above] - v[-1])
    if inner.any():
        yi = ya[inner]
        # right-continuous at atoms: take the highest level whose value <= y
        idx = np.searchsorted(v, yi, side="right") - 1
        idx = np.clip(idx, 0, len(v) - 1)
        res = lv[idx].copy()
        seg = idx < len(v) - 1
        width = np.where(seg, v[np.minimum(idx + 1, len(v) - 1)] - v[idx], 1.0)
        frac = np.zeros_like(yi)
        ok = seg & (width > 0)
        frac[ok] = (yi[ok] - v[idx[ok]]) / width[ok]
        res = res + frac * np.where(seg, lv[np.minimum(idx + 1, len(v) - 1)] - lv[idx], 0.0)
        out[inner] = res
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out


def interp_sample(grid, u):
    """Inverse of interp_cdf for u in (0, 1); knots map back exactly."""
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 0
    ua = np.atleast_1d(u)
    if np.any((ua <= 0) | (ua >= 1)):
        raise DataError("u must lie strictly inside (0, 1)")
    lv, v = grid.levels, grid.values
    s_lo, s_hi = _edge_slopes(grid)
    out = np.interp(ua, lv, v)
    below = ua < lv[0]
    above = ua > lv[-1]
    if below.any():
        step = 0.0 if math.isinf(s_lo) else (ua[below] - lv[0]) / s_lo
        out[below] = v[0] + step
    if above.any():
        step = 0.0 if math.isinf(s_hi) else (ua[above] - lv[-1]) / s_hi
        out[above] = v[-1] + step
    return float(out[0]) if scalar else out


def repair_crossing(levels, raw_values):
    """Sort crossing quantile values into a valid grid (multiset preserved)."""
    levels = np.asarray(levels, dtype=float)
    raw_values = np.asarray(raw_values, dtype=float)
    if levels.shape != raw_values.shape:
        raise DataError("levels and values must have equal length")
    return QuantileGrid(levels, np.sort(raw_values))


# ---------------------------------------------------------------------------
# Skew-t quantile smoothing

def fit_skewt_to_quantiles(levels, values, max_iter=1500):
    """Fit a Skew-t by least squares on predicted quantiles.

    Deterministic: derivative-free simplex search started from
    moment-matched Normal parameters (alpha=0, nu=30).
    """
    levels = np.asarray(levels, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(levels) < 4:
        raise DataError("need at least 4 quantile pairs (4 free parameters)")
    if np.ptp(values) <= 0:
        raise FitError("degenerate quantiles: implied scale is zero",
                       best_params=None, residual=float("inf"))

    xi0 = float(np.interp(0.5, levels, values))
    iqr = float(np.interp(0.75, levels, values) - np.interp(0.25, levels, values))
    omega0 = max(iqr / 1.349, 1e-8)

    def unpack(theta):
        xi, log_om, alpha, s = theta
        nu = 2.0 + math.exp(min(s, 25.0))
        return xi, math.exp(log_om), alpha, nu

    def objective(theta):
        xi, omega, alpha, nu = unpack(theta)
        zq = _skewt_quantiles_std_grid(levels, alpha, nu)
        resid = xi + omega * zq - values
        return float(resid @ resid)

    theta0 = np.array([xi0, math.log(omega0), 0.0, math.log(28.0)])
    res = optimize.minimize(
        objective, theta0, method="Nelder-Mead",
        options={"maxiter": max_iter, "xatol": 1e-8, "fatol": 1e-12},
    )
    xi, omega, alpha, nu = unpack(res.x)
    params = SkewShapeParams(xi=xi, omega=omega, alpha=alpha, nu=nu)
    if not res.success and res.fun > 1e-4 * float(values @ values + 1.0):
        raise FitError("skew-t quantile fit did not converge",
                       best_params=params, residual=float(res.fun))
    return params


# ---------------------------------------------------------------------------
# Serialization

def grid_to_json(grid):
    return json.dumps({"levels": list(grid.levels), "values": list(grid.values)})


def grid_from_json(text):
    obj = json.loads(text)
    return QuantileGrid(obj["levels"], obj["values"])
