"""Proper scoring rules and forecast-evaluation tests.

CRPS (closed-form Normal and draw-based), quantile-weighted CRPS with
tail emphasis, quantile scores, a PIT-uniformity test with block-
bootstrap critical values, an unconditional equal-predictive-ability test
with Newey-West HAC variance, and bootstrap standard errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .dists import NormalParams, QuantileGrid, quantile as dist_quantile
from .errors import DataError

__all__ = [
    "EpaResult",
    "crps",
    "crps_normal_vec",
    "crps_draws",
    "quantile_score",
    "quantile_score_vec",
    "qw_crps",
    "qw_weights",
    "pit_uniformity_test",
    "epa_test",
    "bootstrap_se",
    "DEFAULT_LEVELS",
]

DEFAULT_LEVELS = np.arange(1, 100) / 100.0
trapz = getattr(np, "trapezoid", np.trapz)
_SQRT_PI = math.sqrt(math.pi)


# ---------------------------------------------------------------------------
# CRPS

def crps_normal_vec(mu, sigma, y):
    """Closed-form CRPS of Normal(mu, sigma) at y; broadcasts."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.abs(y - mu)  # degenerate sigma = 0 reduces to absolute error
    pos = sigma > 0
    if np.any(pos):
        z = np.where(pos, (y - mu) / np.where(pos, sigma, 1.0), 0.0)
        phi = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        val = sigma * (z * (2 * special.ndtr(z) - 1) + 2 * phi - 1.0 / _SQRT_PI)
        out = np.where(pos, val, out)
    return out


def crps_draws(draws, y):
    """Draw-based CRPS with the unbiased pairwise spread estimator."""
    x = np.sort(np.asarray(draws, dtype=float))
    n = len(x)
    if n < 2:
        raise DataError("need at least 2 draws")
    mad = np.mean(np.abs(x - y))
    # sum_{i<j} (x_(j) - x_(i)) computed from order statistics
    coef = 2 * np.arange(1, n + 1) - n - 1
    pairwise = 2.0 * np.sum(coef * x) / (n * (n - 1))
    return float(mad - 0.5 * pairwise)


def crps(forecast, y):
    """CRPS of a Normal law or of an ensemble of draws at realization y."""
    if isinstance(forecast, NormalParams):
        return float(crps_normal_vec(forecast.mu, forecast.sigma, y))
    return crps_draws(forecast, y)


# ---------------------------------------------------------------------------
# Quantile scores

def quantile_score(q, predicted_q, y):
    """Tick loss of a q-quantile forecast: (1{y <= q_hat} - q)(q_hat - y)."""
    if not 0 < q < 1:
        raise DataError("quantile level must lie in (0, 1)")
    return float(quantile_score_vec(q, predicted_q, y))


def quantile_score_vec(q, predicted_q, y):
    q = np.asarray(q, dtype=float)
    predicted_q = np.asarray(predicted_q, dtype=float)
    y = np.asarray(y, dtype=float)
    ind = (y <= predicted_q).astype(float)
    return (ind - q) * (predicted_q - y)


def qw_weights(levels, scheme="tails"):
    """Quantile-level weights for the quantile-weighted CRPS."""
    levels = np.asarray(levels, dtype=float)
    if scheme == "tails":
        return (2 * levels - 1) ** 2
    if scheme == "uniform":
        return np.ones_like(levels)
    if scheme == "center":
        return levels * (1 - levels)
    if scheme == "right":
        return levels ** 2
    if scheme == "left":
        return (1 - levels) ** 2
    raise DataError(f"unknown weight scheme {scheme!r}")


def _forecast_quantiles(forecast, levels):
    if isinstance(forecast, (NormalParams, QuantileGrid)):
        return dist_quantile(forecast, levels)
    draws = np.asarray(forecast, dtype=float)
    if draws.ndim != 1 or len(draws) < 2:
        raise DataError("draw-based forecast must be a 1-d array of >= 2 draws")
    return np.quantile(draws, levels)


def qw_crps(forecast, y, weight_scheme="tails", levels=DEFAULT_LEVELS):
    """Quantile-weighted CRPS: 2 * integral of w(tau) * QS_tau over tau.

    Trapezoid quadrature on the level grid (tails beyond the grid edges
    are dropped); with uniform weights this reproduces the CRPS up to
    quadrature error.
    """
    levels = np.asarray(levels, dtype=float)
    q = _forecast_quantiles(forecast, levels)
    qs = quantile_score_vec(levels, q, y)
    w = qw_weights(levels, weight_scheme)
    return float(2.0 * trapz(w * qs, levels))


# ---------------------------------------------------------------------------
# PIT uniformity

def ks_uniform_statistic(pits):
    """sup |empirical CDF - uniform CDF| for values in [0, 1]."""
    u = np.sort(np.asarray(pits, dtype=float))
    n = len(u)
    i = np.arange(1, n + 1)
    return float(np.max(np.maximum(i / n - u, u - (i - 1) / n)))


@lru_cache(maxsize=64)
def _ks_block_bootstrap_critvals(n, block, n_boot, seed):
    """Null distribution of the KS statistic for n PITs with serial
    dependence mimicked by a moving-block bootstrap of uniforms."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(n, block)))
    stats = np.empty(n_boot)
    n_blocks = -(-n // block)
    for b in range(n_boot):
        base = rng.uniform(size=n)
        if block > 1:
            starts = rng.integers(0, n - block + 1, size=n_blocks)
            idx = (starts[:, None] + np.arange(block)[None, :]).ravel()[:n]
            sample = base[idx]
        else:
            sample = base
        stats[b] = ks_uniform_statistic(sample)
    return np.quantile(stats, [0.90, 0.95, 0.99])


def pit_uniformity_test(pits, h=1, n_boot=5000, seed=20_240_101):
    """KS-type test of PIT uniformity with h-dependent critical values.

    Returns (statistic, {size: critical value}, {size: reject flag}).
    """
    pits = np.asarray(pits, dtype=float)
    if len(pits) < 20:
        raise DataError(f"need at least 20 PITs, got {len(pits)}")
    if np.any((pits < 0) | (pits > 1)):
        raise DataError("PITs must lie in [0, 1]")
    stat = ks_uniform_statistic(pits)
    block = max(int(h), 1)
    cv = _ks_block_bootstrap_critvals(len(pits), block, int(n_boot), int(seed))
    crit = {0.10: cv[0], 0.05: cv[1], 0.01: cv[2]}
    reject = {size: stat > c for size, c in crit.items()}
    return stat, crit, reject


# ---------------------------------------------------------------------------
# Equal predictive ability

@dataclass(frozen=True)
class EpaResult:
    statistic: float
    p_value: float
    mean_diff: float
    bandwidth: int


def _newey_west_lrv(d, bandwidth):
    d = d - d.mean()
    n = len(d)
    lrv = float(d @ d) / n
    for lag in range(1, min(bandwidth, n - 1) + 1):
        w = 1.0 - lag / (bandwidth + 1.0)
        lrv += 2.0 * w * float(d[lag:] @ d[:-lag]) / n
    return lrv


def epa_test(loss_a, loss_b, hac_bandwidth=0) -> EpaResult:
    """Unconditional equal-predictive-ability t-test on d = loss_a - loss_b
    with Bartlett-kernel Newey-West variance."""
    a = np.asarray(loss_a, dtype=float)
    b = np.asarray(loss_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError("loss series must be aligned 1-d arrays")
    n = len(a)
    if n < 10:
        raise DataError(f"need at least 10 aligned losses, got {n}")
    if hac_bandwidth < 0:
        raise DataError("bandwidth must be >= 0")
    d = a - b
    mean = float(d.mean())
    lrv = _newey_west_lrv(d, int(hac_bandwidth))
    if lrv <= 0:
        stat = 0.0 if mean == 0 else math.copysign(math.inf, mean)
    else:
        stat = mean / math.sqrt(lrv / n)
    if math.isinf(stat):
        p = 0.0
    else:
        p = 2.0 * (1.0 - special.ndtr(abs(stat)))
    return EpaResult(statistic=float(stat), p_value=float(p),
                     mean_diff=mean, bandwidth=int(hac_bandwidth))


def bootstrap_se(values, n_boot=999, seed=0):
    """iid bootstrap standard error of the sample mean."""
    if n_boot < 200:
        raise DataError("need at least 200 bootstrap replications")
    v = np.asarray(values, dtype=float)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(v), size=(n_boot, len(v)))
    return float(np.std(v[idx].mean(axis=1), ddof=1))
