"""Direct multi-step forecasting models and the VAR(1) data generator.

OLS direct AR with Normal errors, direct quantile regression smoothed by
a Skew-t, a direct ARDL variant for bivariate systems, and the two-
equation VAR(1) simulator with Normal, Skew-Normal, or Skew-t shocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dists import (
    NormalParams,
    calibrate_skew_shape,
    fit_skewt_to_quantiles,
    repair_crossing,
    sample as dist_sample,
)
from .errors import DataError, EstimationError

__all__ = [
    "VarDgpParams",
    "DirectOlsFit",
    "DirectQrFit",
    "RollingWindowSpec",
    "simulate_dgp",
    "fit_direct_ols",
    "predict_direct_ols",
    "fit_direct_qr",
    "predict_direct_qr",
    "fit_direct_ardl",
    "QR_QUANTILES",
]

QR_QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass(frozen=True)
class VarDgpParams:
    """Two-equation VAR(1): Y depends on its own lag and lagged X; X is an
    autonomous AR(1). Shock of Y can be Normal, Skew-Normal, or Skew-t,
    calibrated to mean zero and the given standard deviation."""

    tau1: float = 0.2
    tau2: float = 0.0
    theta1: float = 0.4
    theta2: float = 0.5
    gamma: float = 0.5
    sigma_eps1: float = 0.5
    sigma_eps2: float = 0.3
    shock_family: str = "normal"  # normal | skew_normal | skew_t
    shock_alpha: float = -3.0
    shock_nu: float = 8.0

    def __post_init__(self):
        if self.sigma_eps1 <= 0 or self.sigma_eps2 <= 0:
            raise DataError("shock standard deviations must be > 0")
        if self.shock_family not in ("normal", "skew_normal", "skew_t"):
            raise DataError(f"unknown shock family {self.shock_family!r}")
        companion = np.array([[self.theta1, self.theta2], [0.0, self.gamma]])
        if np.max(np.abs(np.linalg.eigvals(companion))) >= 1.0:
            raise DataError("VAR parameters are non-stationary")

    def shock_dist(self):
        """Calibrated law of the Y-equation shock."""
        if self.shock_family == "normal":
            return NormalParams(mu=0.0, sigma=self.sigma_eps1)
        nu = math.inf if self.shock_family == "skew_normal" else self.shock_nu
        return calibrate_skew_shape(self.shock_alpha, nu, self.sigma_eps1)


def simulate_dgp(p: VarDgpParams, n_obs: int, burn_in: int = 200, rng=None):
    """Simulate (Y, X) of length n_obs after discarding burn_in draws."""
    if burn_in < 100:
        raise DataError("burn_in must be >= 100")
    if rng is None:
        rng = np.random.default_rng(0)
    total = n_obs + burn_in
    eps1 = dist_sample(p.shock_dist(), rng, total)
    eps2 = p.sigma_eps2 * rng.standard_normal(total)
    y = np.empty(total)
    x = np.empty(total)
    y_prev, x_prev = 0.0, 0.0
    for t in range(total):
        x[t] = p.tau2 + p.gamma * x_prev + eps2[t]
        y[t] = p.tau1 + p.theta1 * y_prev + p.theta2 * x_prev + eps1[t]
        y_prev, x_prev = y[t], x[t]
    return y[burn_in:], x[burn_in:]


@dataclass(frozen=True)
class RollingWindowSpec:
    window: int
    step: int = 1
    first_origin: int = 0

    def __post_init__(self):
        if self.window < 20:
            raise DataError("window length must be >= 20")
        if self.step < 1:
            raise DataError("step must be >= 1")


@dataclass
class DirectOlsFit:
    """Per-horizon records (intercept, slope, residual variance)."""

    intercepts: np.ndarray
    slopes: np.ndarray
    resid_vars: np.ndarray

    @property
    def horizons(self) -> int:
        return len(self.intercepts)


def _ols_1x(x, y):
    n = len(x)
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    if sxx <= 1e-14 * n * max(1.0, xm * xm):
        raise EstimationError("regressor is (numerically) constant")
    beta = float(((x - xm) * (y - ym)).sum()) / sxx
    tau = ym - beta * xm
    resid = y - tau - beta * x
    dof = max(n - 2, 1)
    return tau, beta, float(resid @ resid) / dof


def fit_direct_ols(y, horizons: int, window=None) -> DirectOlsFit:
    """Least-squares fit of y[t+h] on (1, y[t]) for each h, over the last
    `window` usable pairs (or all of them when window is None)."""
    y = np.asarray(y, dtype=float)
    taus = np.empty(horizons)
    betas = np.empty(horizons)
    rvars = np.empty(horizons)
    for h in range(1, horizons + 1):
        x_all = y[:-h]
        z_all = y[h:]
        if window is not None:
            w = window.window if isinstance(window, RollingWindowSpec) else int(window)
            x_all, z_all = x_all[-w:], z_all[-w:]
        if len(x_all) <= 3:
            raise EstimationError(f"not enough observations at horizon {h}")
        taus[h - 1], betas[h - 1], rvars[h - 1] = _ols_1x(x_all, z_all)
    return DirectOlsFit(intercepts=taus, slopes=betas, resid_vars=rvars)


def predict_direct_ols(fit: DirectOlsFit, y_origin: float, h: int) -> NormalParams:
    if not 1 <= h <= fit.horizons:
        raise DataError(f"horizon {h} outside fitted range 1..{fit.horizons}")
    mu = fit.intercepts[h - 1] + fit.slopes[h - 1] * y_origin
    return NormalParams(mu=float(mu), sigma=float(math.sqrt(max(fit.resid_vars[h - 1], 0.0))))


# ---------------------------------------------------------------------------
# Quantile regression (iteratively reweighted least squares)

def _qr_fit_one(xmat, y, q, eps=1e-6, max_iter=200, tol=1e-9):
    """Tick-loss minimization by IRLS with epsilon-smoothed weights."""
    beta, *_ = np.linalg.lstsq(xmat, y, rcond=None)
    for _ in range(max_iter):
        resid = y - xmat @ beta
        w = np.where(resid > 0, q, 1.0 - q) / np.maximum(np.abs(resid), eps)
        wx = xmat * w[:, None]
        try:
            new = np.linalg.solve(xmat.T @ wx, wx.T @ y)
        except np.linalg.LinAlgError as exc:
            raise EstimationError("quantile regression system is singular") from exc
        if np.max(np.abs(new - beta)) < tol:
            beta = new
            break
        beta = new
    return beta


@dataclass
class DirectQrFit:
    """Per (horizon, quantile) coefficients of y[t+h] on (1, y[t])."""

    quantiles: tuple
    intercepts: np.ndarray  # H x Q
    slopes: np.ndarray      # H x Q

    @property
    def horizons(self) -> int:
        return self.intercepts.shape[0]


def fit_direct_qr(y, horizons: int, window=None, quantiles=QR_QUANTILES) -> DirectQrFit:
    y = np.asarray(y, dtype=float)
    quantiles = tuple(quantiles)
    taus = np.empty((horizons, len(quantiles)))
    betas = np.empty((horizons, len(quantiles)))
    for h in range(1, horizons + 1):
        x_all = y[:-h]
        z_all = y[h:]
        if window is not None:
            w = window.window if isinstance(window, RollingWindowSpec) else int(window)
            x_all, z_all = x_all[-w:], z_all[-w:]
        if len(x_all) < 40:
            raise EstimationError(f"need >= 40 observations per horizon, got {len(x_all)}")
        xmat = np.column_stack([np.ones_like(x_all), x_all])
        for k, q in enumerate(quantiles):
            coef = _qr_fit_one(xmat, z_all, q)
            taus[h - 1, k], betas[h - 1, k] = coef[0], coef[1]
    return DirectQrFit(quantiles=quantiles, intercepts=taus, slopes=betas)


def predict_direct_qr(fit: DirectQrFit, y_origin: float, h: int):
    """Evaluate the fitted quantile lines at the origin, repair crossing,
    and smooth with a Skew-t. Returns (QuantileGrid, SkewShapeParams)."""
    if not 1 <= h <= fit.horizons:
        raise DataError(f"horizon {h} outside fitted range 1..{fit.horizons}")
    raw = fit.intercepts[h - 1] + fit.slopes[h - 1] * y_origin
    grid = repair_crossing(np.asarray(fit.quantiles), raw)
    smoothed = fit_skewt_to_quantiles(grid.levels, grid.values)
    return grid, smoothed


# ---------------------------------------------------------------------------
# Direct ARDL (bivariate)

@dataclass
class ArdlFit:
    lags: int
    coefs: np.ndarray        # per horizon: [alpha, beta_0..beta_{p-1}, gamma_0..gamma_{p-1}]
    resid_vars: np.ndarray
    ridge_fallback: bool = field(default=False)

    @property
    def horizons(self) -> int:
        return self.coefs.shape[0]


def _ardl_design(y1, y2, p, h, window):
    t_max = len(y1) - h
    rows = range(p - 1, t_max)
    x = np.array([
        np.concatenate(([1.0], y1[t - p + 1:t + 1][::-1], y2[t - p + 1:t + 1][::-1]))
        for t in rows
    ])
    z = y1[np.arange(p - 1, t_max) + h]
    if window is not None:
        w = window.window if isinstance(window, RollingWindowSpec) else int(window)
        x, z = x[-w:], z[-w:]
    return x, z


def _ardl_solve(x, z):
    ridge = False
    gram = x.T @ x
    try:
        coef = np.linalg.solve(gram, x.T @ z)
        if np.linalg.cond(gram) > 1e12:
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        coef = np.linalg.solve(gram + 1e-8 * np.eye(gram.shape[0]), x.T @ z)
        ridge = True
    resid = z - x @ coef
    dof = max(len(z) - x.shape[1], 1)
    return coef, float(resid @ resid) / dof, ridge


def fit_direct_ardl(y1, y2, lags, horizons: int, window=None) -> ArdlFit:
    """Direct ARDL per horizon: y1[t+h] on a constant plus `lags` own lags
    and `lags` lags of y2. lags="bic" searches p in 1..12."""
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    if len(y1) != len(y2):
        raise DataError("series must have equal length")

    if lags == "bic":
        p = _select_lags_bic(y1, y2, horizons, window)
    else:
        p = int(lags)
    if p < 1:
        raise DataError("lag count must be >= 1")
    k = 2 * p + 1
    coefs = np.empty((horizons, k))
    rvars = np.empty(horizons)
    ridge_any = False
    for h in range(1, horizons + 1):
        x, z = _ardl_design(y1, y2, p, h, window)
        if len(z) <= 2 * p + 2:
            raise EstimationError(f"window too short for p={p} at horizon {h}")
        coefs[h - 1], rvars[h - 1], ridge = _ardl_solve(x, z)
        ridge_any = ridge_any or ridge
    return ArdlFit(lags=p, coefs=coefs, resid_vars=rvars, ridge_fallback=ridge_any)


def _select_lags_bic(y1, y2, horizons, window, candidates=range(1, 13)):
    """BIC = n log(RSS/n) + k log(n) on a common effective sample (h=1)."""
    best_p, best_bic = None, math.inf
    p_max = max(candidates)
    for p in candidates:
        x, z = _ardl_design(y1, y2, p, 1, window)
        # align all candidates on the sample the largest p can use
        trim = len(z) - (len(y1) - 1 - (p_max - 1))
        if trim > 0:
            x, z = x[trim:], z[trim:]
        coef, rvar, _ = _ardl_solve(x, z)
        n = len(z)
        rss = max(rvar * max(n - x.shape[1], 1), 1e-300)
        bic = n * math.log(rss / n) + x.shape[1] * math.log(n)
        if bic < best_bic:
            best_p, best_bic = p, bic
    return best_p


def predict_direct_ardl(fit: ArdlFit, y1_hist, y2_hist, h: int) -> NormalParams:
    p = fit.lags
    if not 1 <= h <= fit.horizons:
        raise DataError(f"horizon {h} outside fitted range 1..{fit.horizons}")
    y1_hist = np.asarray(y1_hist, dtype=float)
    y2_hist = np.asarray(y2_hist, dtype=float)
    if len(y1_hist) < p or len(y2_hist) < p:
        raise DataError(f"need {p} trailing observations of each series")
    x = np.concatenate(([1.0], y1_hist[-p:][::-1], y2_hist[-p:][::-1]))
    mu = float(x @ fit.coefs[h - 1])
    return NormalParams(mu=mu, sigma=math.sqrt(max(fit.resid_vars[h - 1], 0.0)))
