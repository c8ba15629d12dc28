"""Closed-form AR(1) oracle.

Forecast-error moments, the dependence-attentive and dependence-
inattentive predictive laws for weighted sums of multi-horizon forecasts,
the exact joint Normal forecast law, MSFE ratios of the direct
aggregate-regression alternative, and the simulated score-gain surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import scoring
from .dists import NormalParams
from .errors import DataError

__all__ = [
    "Ar1Params",
    "GainSurfacePoint",
    "error_variance",
    "error_autocorr",
    "attentive_law",
    "inattentive_law",
    "joint_law",
    "msfe_ratio",
    "gain_surface",
]


@dataclass(frozen=True)
class Ar1Params:
    """Mean-zero AR(1): Y[t+1] = rho * Y[t] + eps, eps ~ N(0, sigma_eps^2)."""

    rho: float
    sigma_eps: float = 1.0

    def __post_init__(self):
        if not abs(self.rho) < 1:
            raise DataError(f"|rho| must be < 1, got {self.rho}")
        if self.sigma_eps <= 0:
            raise DataError(f"sigma_eps must be > 0, got {self.sigma_eps}")


@dataclass(frozen=True)
class GainSurfacePoint:
    rho: float
    h: int
    crps_gain_pct: float
    qwcrps_gain_pct: float
    qs10_gain_pct: float


def error_variance(p: Ar1Params, h: int) -> float:
    """Variance of the h-step forecast error."""
    if h < 1:
        raise DataError("h must be >= 1")
    s2 = p.sigma_eps ** 2
    if p.rho == 0:
        return s2
    return s2 * (1 - p.rho ** (2 * h)) / (1 - p.rho ** 2)


def error_autocorr(p: Ar1Params, h: int, k: int) -> float:
    """Correlation of the h-step and (h-k)-step forecast errors."""
    if not (h > k > 0):
        raise DataError("need h > k > 0")
    if p.rho == 0:
        return 0.0
    return p.rho ** k * math.sqrt(
        (1 - p.rho ** (2 * (h - k))) / (1 - p.rho ** (2 * h))
    )


def _mean_weighted(p, w, y_t):
    j = np.arange(1, len(w) + 1)
    return float(np.sum(np.asarray(w) * p.rho ** j) * y_t)


def attentive_law(p: Ar1Params, w, y_t: float) -> NormalParams:
    """Predictive law of the weighted forecast sum with the true
    cross-horizon error covariance."""
    w = np.asarray(w, dtype=float)
    h = len(w)
    var = sum(w[j - 1] ** 2 * error_variance(p, j) for j in range(1, h + 1))
    for j in range(2, h + 1):
        for k in range(1, j):
            cov = error_autocorr(p, j, k) * math.sqrt(
                error_variance(p, j) * error_variance(p, j - k)
            )
            var += 2 * w[j - 1] * w[j - k - 1] * cov
    return NormalParams(mu=_mean_weighted(p, w, y_t), sigma=math.sqrt(max(var, 0.0)))


def inattentive_law(p: Ar1Params, w, y_t: float) -> NormalParams:
    """Same mean, but variance built as if the errors were independent
    across horizons."""
    w = np.asarray(w, dtype=float)
    var = sum(w[j - 1] ** 2 * error_variance(p, j) for j in range(1, len(w) + 1))
    return NormalParams(mu=_mean_weighted(p, w, y_t), sigma=math.sqrt(var))


def joint_law(p: Ar1Params, h: int, y_t: float):
    """Mean vector and covariance matrix of (Y[t+1|t], ..., Y[t+h|t]).

    Weights stay outside the joint law; apply them in the transform step.
    """
    if h < 1:
        raise DataError("h must be >= 1")
    j = np.arange(1, h + 1)
    mean = p.rho ** j * y_t
    cov = np.empty((h, h))
    s2 = p.sigma_eps ** 2
    for a in range(1, h + 1):
        for b in range(1, h + 1):
            m = min(a, b)
            if p.rho == 0:
                cov[a - 1, b - 1] = s2 if a == b else 0.0
            else:
                cov[a - 1, b - 1] = (
                    s2 * p.rho ** abs(a - b) * (1 - p.rho ** (2 * m)) / (1 - p.rho ** 2)
                )
    return mean, cov


def msfe_ratio(p: Ar1Params, horizon_case: str) -> float:
    """MSFE of the path-coherent aggregate forecast relative to the
    direct aggregate-regression forecast (two-period-year setup)."""
    r = p.rho
    if horizon_case == "one_year":
        return (r ** 2 + 4 * r + 5) / (6 * r ** 2 + 8 * r + 6)
    if horizon_case == "two_year":
        num = r ** 6 + 4 * r ** 5 + 7 * r ** 4 + 8 * (r ** 3 + r ** 2 + r) + 6
        den = 6 * r ** 6 + 8 * (r ** 5 + r ** 4 + r ** 3 + r ** 2 + r) + 6
        return num / den
    raise DataError(f"unknown horizon_case {horizon_case!r}")


def _gain_pct(loss_wide, loss_narrow):
    base = float(np.mean(loss_wide))
    return 100.0 * (base - float(np.mean(loss_narrow))) / base


def gain_point(p: Ar1Params, h: int, n_rep: int, seed) -> GainSurfacePoint:
    """Simulated score gain of the dependence-attentive density over the
    dependence-inattentive one at unit weights.

    Each replication draws the origin state from the stationary law and
    the realization from the true (attentive) predictive law; both
    candidate Normal densities are scored in closed form.
    """
    w = np.ones(h)
    att0 = attentive_law(p, w, 0.0)
    inn0 = inattentive_law(p, w, 0.0)
    rng = np.random.default_rng(seed)
    stat_sd = p.sigma_eps / math.sqrt(1 - p.rho ** 2)
    y0 = rng.standard_normal(n_rep) * stat_sd
    j = np.arange(1, h + 1)
    mu = np.sum(p.rho ** j) * y0
    z = mu + att0.sigma * rng.standard_normal(n_rep)

    crps_att = scoring.crps_normal_vec(mu, att0.sigma, z)
    crps_inn = scoring.crps_normal_vec(mu, inn0.sigma, z)

    levels = scoring.DEFAULT_LEVELS
    from scipy.special import ndtri

    zq = ndtri(levels)
    qs_att = scoring.quantile_score_vec(levels[None, :], mu[:, None] + att0.sigma * zq[None, :], z[:, None])
    qs_inn = scoring.quantile_score_vec(levels[None, :], mu[:, None] + inn0.sigma * zq[None, :], z[:, None])
    wts = scoring.qw_weights(levels, "tails")
    qw_att = 2.0 * scoring.trapz(wts[None, :] * qs_att, levels, axis=1)
    qw_inn = 2.0 * scoring.trapz(wts[None, :] * qs_inn, levels, axis=1)

    q10_att = mu + att0.sigma * ndtri(0.10)
    q10_inn = mu + inn0.sigma * ndtri(0.10)
    qs10_att = scoring.quantile_score_vec(0.10, q10_att, z)
    qs10_inn = scoring.quantile_score_vec(0.10, q10_inn, z)

    return GainSurfacePoint(
        rho=p.rho,
        h=h,
        crps_gain_pct=_gain_pct(crps_inn, crps_att),
        qwcrps_gain_pct=_gain_pct(qw_inn, qw_att),
        qs10_gain_pct=_gain_pct(qs10_inn, qs10_att),
    )


def gain_surface(rho_grid, h_grid, n_rep: int, seed, sigma_eps: float = 1.0):
    """Score-gain surface over (rho, h) grids; one substream per point."""
    points = []
    for i, rho in enumerate(rho_grid):
        for j, h in enumerate(h_grid):
            sub = np.random.SeedSequence(entropy=int(seed), spawn_key=(i, j))
            points.append(gain_point(Ar1Params(rho=rho, sigma_eps=sigma_eps),
                                     int(h), n_rep, sub))
    return points
