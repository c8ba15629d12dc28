"""Gaussian copula over forecast horizons.

Estimates the copula correlation matrix from a panel of realized PITs
(rank correlations mapped to the Gaussian parameter), repairs it to the
nearest valid correlation matrix, and samples joint horizon paths through
the lower-Cholesky recipe.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .dists import quantile_vec
from .errors import DataError, EstimationError, NumericalError

__all__ = [
    "CorrelationMatrix",
    "PitPanel",
    "fit_copula",
    "pit_corr_from_gaussian",
    "pit_corr_theoretical",
    "nearest_correlation",
    "cholesky_factor",
    "sample_joint",
    "corr_to_json",
    "corr_from_json",
]

_SHRINK = 1.0 - 1e-8  # cap for perfect correlations before Cholesky
_TAIL_CLAMP = 1e-12


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric, unit-diagonal, PSD (up to -1e-10) matrix."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DataError("correlation matrix must be square")
        if not np.allclose(m, m.T, atol=1e-12):
            raise DataError("correlation matrix must be symmetric within 1e-12")
        if not np.allclose(np.diag(m), 1.0, atol=1e-12):
            raise DataError("correlation matrix must have unit diagonal")
        if np.any(np.abs(m) > 1 + 1e-12):
            raise DataError("off-diagonal entries must lie in [-1, 1]")
        if np.linalg.eigvalsh(m).min() < -1e-10:
            raise DataError("correlation matrix is not PSD (use nearest_correlation)")
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def determinant(self) -> float:
        """det(R) via the Cholesky factor; 1 under independence."""
        p = cholesky_factor(self)
        return float(np.prod(np.diag(p)) ** 2)


@dataclass
class PitPanel:
    """T x H matrix of realized PITs, NaN marking missing cells."""

    pits: np.ndarray = field()

    def __post_init__(self):
        m = np.asarray(self.pits, dtype=float)
        if m.ndim != 2:
            raise DataError("PIT panel must be 2-d (origins x horizons)")
        present = ~np.isnan(m)
        vals = m[present]
        if np.any((vals < 0) | (vals > 1)):
            raise DataError("PITs must lie in [0, 1]")
        self.pits = m

    @property
    def n_origins(self) -> int:
        return self.pits.shape[0]

    @property
    def n_horizons(self) -> int:
        return self.pits.shape[1]


def pit_corr_from_gaussian(r):
    """Pearson correlation of two PITs implied by Gaussian correlation r."""
    r = np.asarray(r, dtype=float)
    return (6.0 / np.pi) * np.arcsin(r / 2.0)


def pit_corr_theoretical(rho, h, k):
    """PIT correlation between horizons h and h-k under an AR(1) with
    coefficient rho (composition of the forecast-error autocorrelation
    with the Gaussian-to-PIT map)."""
    if not (h > k > 0):
        raise DataError("need h > k > 0")
    rho = np.asarray(rho, dtype=float)
    if np.any(np.abs(rho) > 1):
        raise DataError("|rho| must be <= 1")
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = rho ** k * np.sqrt((1 - rho ** (2 * (h - k))) / (1 - rho ** (2 * h)))
    inner = np.where(np.abs(rho) == 1.0, np.sign(rho) ** k, inner)
    return pit_corr_from_gaussian(inner)


def _spearman_to_gaussian(rho_s):
    return 2.0 * np.sin(np.pi * rho_s / 6.0)


def fit_copula(panel: PitPanel, method: str = "spearman") -> CorrelationMatrix:
    """Estimate the copula correlation matrix from a PIT panel.

    method="spearman" (default): pairwise-complete Spearman rank
    correlations mapped to the Gaussian parameter via 2*sin(pi*rho_s/6).
    method="pearson_normal_scores": Pearson correlation of the
    Gaussian-scored PITs (the literal Gaussian-copula MLE), for
    sensitivity analysis.
    """
    pits = panel.pits
    h = panel.n_horizons
    present = ~np.isnan(pits)
    counts = present.sum(axis=0)
    short = np.nonzero(counts < 3)[0]
    if len(short) > 0:
        raise EstimationError(
            f"horizon {short[0] + 1} has only {counts[short[0]]} PITs (< 3)"
        )
    raw = np.eye(h)
    if method == "pearson_normal_scores":
        scores = special.ndtri(np.clip(pits, _TAIL_CLAMP, 1 - _TAIL_CLAMP))
    elif method != "spearman":
        raise DataError(f"unknown estimation method {method!r}")
    for i in range(h):
        for j in range(i + 1, h):
            both = present[:, i] & present[:, j]
            if both.sum() < 3:
                raise EstimationError(
                    f"horizons {i + 1} and {j + 1} share only {int(both.sum())} origins"
                )
            if method == "spearman":
                rho_s = stats.spearmanr(pits[both, i], pits[both, j]).statistic
                if np.isnan(rho_s):  # constant column after ranking
                    rho_s = 0.0
                r = float(_spearman_to_gaussian(rho_s))
            else:
                r = float(np.corrcoef(scores[both, i], scores[both, j])[0, 1])
                if np.isnan(r):
                    r = 0.0
            raw[i, j] = raw[j, i] = np.clip(r, -_SHRINK, _SHRINK)
    return nearest_correlation(raw)


def nearest_correlation(raw, tol: float = 1e-10, max_sweeps: int = 200) -> CorrelationMatrix:
    """Project a symmetric matrix to the nearest correlation matrix.

    Alternating projections between the PSD cone and the unit-diagonal
    affine set (Higham's method). A matrix that is already valid is
    returned unchanged bitwise.
    """
    a = np.asarray(raw, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or not np.allclose(a, a.T, atol=1e-12):
        raise DataError("input must be a symmetric square matrix")
    if (np.allclose(np.diag(a), 1.0, atol=1e-12)
            and np.linalg.eigvalsh(a).min() >= -1e-10
            and np.all(np.abs(a) <= 1 + 1e-12)):
        return CorrelationMatrix(a)

    y = a.copy()
    ds = np.zeros_like(a)
    last = None
    for _ in range(max_sweeps):
        r = y - ds
        w, v = np.linalg.eigh((r + r.T) / 2.0)
        x = (v * np.clip(w, 0.0, None)) @ v.T
        ds = x - r
        y = x.copy()
        np.fill_diagonal(y, 1.0)
        y = np.clip(y, -1.0, 1.0)
        y = (y + y.T) / 2.0
        if last is not None and np.linalg.norm(y - last, "fro") < tol:
            break
        last = y.copy()
    else:
        raise NumericalError(
            f"nearest-correlation projection did not converge in {max_sweeps} sweeps "
            f"(residual {np.linalg.norm(y - last, 'fro'):.3e})"
        )
    # final tiny eigenvalue cleanup so the constructor accepts the result
    w, v = np.linalg.eigh(y)
    if w.min() < -1e-10:
        y = (v * np.clip(w, 0.0, None)) @ v.T
        d = np.sqrt(np.clip(np.diag(y), 1e-300, None))
        y = y / np.outer(d, d)
        np.fill_diagonal(y, 1.0)
        y = (y + y.T) / 2.0
    return CorrelationMatrix(y)


def cholesky_factor(r: CorrelationMatrix, jitter: float = 1e-10) -> np.ndarray:
    """Lower Cholesky factor of R; adds jitter*I once if a pivot fails."""
    m = r.entries
    # shrink exact +/-1 off-diagonals so the factor stays finite
    if np.any(np.abs(m - np.eye(r.dim)) >= 1.0):
        m = np.clip(m, -_SHRINK, _SHRINK)
        np.fill_diagonal(m, 1.0)
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        try:
            return np.linalg.cholesky(m + jitter * np.eye(r.dim))
        except np.linalg.LinAlgError as exc:
            raise NumericalError("Cholesky pivot failure after jitter") from exc


def sample_joint(marginals, r: CorrelationMatrix, n_draws: int, seed,
                 block_size: int = 10_000) -> np.ndarray:
    """Sample S x H joint horizon paths through the Gaussian copula.

    Per draw: X ~ iid N(0, I), Z = P X, U = Phi(Z), column j inverts
    marginal j at U_j. Draws are generated in fixed-size blocks with
    counter-based substreams, so the output depends only on (seed,
    n_draws) and never on worker count.
    """
    h = r.dim
    if len(marginals) != h:
        raise DataError(f"got {len(marginals)} marginals for R of dimension {h}")
    if n_draws < 1:
        raise DataError("n_draws must be >= 1")
    p = cholesky_factor(r)
    u = np.empty((n_draws, h))
    for b, start in enumerate(range(0, n_draws, block_size)):
        stop = min(start + block_size, n_draws)
        rng = np.random.default_rng(_block_seed(seed, b))
        x = rng.standard_normal((stop - start, h))
        z = x @ p.T
        u[start:stop] = special.ndtr(z)
    np.clip(u, _TAIL_CLAMP, 1.0 - _TAIL_CLAMP, out=u)
    out = np.empty_like(u)
    for j, marginal in enumerate(marginals):
        out[:, j] = quantile_vec(marginal, u[:, j])
    return out


def _block_seed(seed, block_index):
    """Counter-based substream for one block of draws."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(
            entropy=seed.entropy, spawn_key=tuple(seed.spawn_key) + (block_index,)
        )
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(block_index,))


# ---------------------------------------------------------------------------
# Serialization

def corr_to_json(r: CorrelationMatrix) -> str:
    return json.dumps({"dim": r.dim, "entries": r.entries.ravel().tolist()})


def corr_from_json(text: str) -> CorrelationMatrix:
    obj = json.loads(text)
    dim = int(obj["dim"])
    m = np.asarray(obj["entries"], dtype=float).reshape(dim, dim)
    return CorrelationMatrix(m)


def pit_panel_to_csv(panel: PitPanel, path):
    import pandas as pd

    cols = [f"h{j + 1}" for j in range(panel.n_horizons)]
    df = pd.DataFrame(panel.pits, columns=cols)
    df.insert(0, "origin", np.arange(panel.n_origins))
    df.to_csv(path, index=False)


def pit_panel_from_csv(path) -> PitPanel:
    import pandas as pd

    df = pd.read_csv(path)
    cols = [c for c in df.columns if c != "origin"]
    return PitPanel(df[cols].to_numpy(dtype=float))
