"""Target-frequency transformations of joint horizon draws.

Weighted linear maps from an H-horizon forecast path (plus trailing
observed values) to a scalar target-frequency quantity: year-on-year and
annual-average builders, Mariano-Murasawa monthly-to-quarterly weights,
the year-on-year to month-on-month recursion, and cumulative-growth
conventions. All growth arithmetic uses the log-growth (additive)
approximation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

__all__ = [
    "TransformSpec",
    "apply_transform",
    "spec_qoq_from_mom",
    "spec_annual_avg_from_qoq",
    "spec_yoy_from_qoq",
    "spec_yoy_from_mom",
    "yoy_to_mom",
    "cum_growth",
    "quarterly_avg_from_monthly_levels",
    "spec_to_json",
    "spec_from_json",
]


@dataclass(frozen=True)
class TransformSpec:
    """Linear map from a forecast path and trailing history to a scalar.

    forecast_weights[j-1] multiplies the horizon-j forecast; each
    observed term is a (lag, weight) pair applied to realized history,
    lag 0 being the forecast-origin observation.
    """

    forecast_weights: tuple
    observed_terms: tuple = field(default=())
    label: str = "custom"

    def __post_init__(self):
        fw = tuple(float(w) for w in self.forecast_weights)
        ot = tuple((int(lag), float(w)) for lag, w in self.observed_terms)
        if len(fw) < 1:
            raise DataError("forecast_weights must have length >= 1")
        if not all(np.isfinite(fw)):
            raise DataError("weights must be finite")
        if any(lag < 0 for lag, _ in ot):
            raise DataError("observed lags must be >= 0")
        if not any(w != 0 for w in fw) and not any(w != 0 for _, w in ot):
            raise DataError("at least one weight must be nonzero")
        object.__setattr__(self, "forecast_weights", fw)
        object.__setattr__(self, "observed_terms", ot)

    @property
    def horizon(self) -> int:
        return len(self.forecast_weights)

    @property
    def max_lag(self) -> int:
        return max((lag for lag, _ in self.observed_terms), default=-1)


def apply_transform(draws, spec: TransformSpec, history=None):
    """Map S x H draws to S target-frequency values.

    history holds trailing realized values, most recent last; history[-1]
    is lag 0 (the forecast origin).
    """
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 1:
        draws = draws[None, :]
    if draws.shape[1] != spec.horizon:
        raise DataError(
            f"draws have {draws.shape[1]} horizons, spec expects {spec.horizon}"
        )
    out = draws @ np.asarray(spec.forecast_weights)
    if spec.observed_terms:
        if history is None:
            raise DataError(f"transform needs history up to lag {spec.max_lag}")
        history = np.asarray(history, dtype=float)
        if len(history) <= spec.max_lag:
            raise DataError(
                f"history of length {len(history)} misses lag {spec.max_lag}"
            )
        out = out + sum(w * history[-1 - lag] for lag, w in spec.observed_terms)
    return out


def spec_qoq_from_mom() -> TransformSpec:
    """Mariano-Murasawa weights: six month-on-month forecasts to the
    two-quarter-ahead quarter-on-quarter growth forecast."""
    return TransformSpec(
        forecast_weights=(0.0, 1 / 3, 2 / 3, 1.0, 2 / 3, 1 / 3),
        label="qoq-from-mom",
    )


def spec_annual_avg_from_qoq(year: int = 1, origin_is_q4: bool = True) -> TransformSpec:
    """Annual-average growth for calendar year `year` ahead from
    quarter-on-quarter forecasts, origin at Q4.

    Year 1 combines trailing observations with the first four horizons;
    later years shift the same seven-quarter window forward so only
    forecast terms remain.
    """
    if not origin_is_q4:
        raise DataError("annual-average weights are defined for Q4 origins only")
    if year < 1:
        raise DataError("year must be >= 1")
    window = (0.25, 0.5, 0.75, 1.0, 0.75, 0.5, 0.25)  # quarters t+4y-6 .. t+4y
    horizon = 4 * year
    weights = [0.0] * horizon
    observed = []
    for offset, w in zip(range(horizon - 6, horizon + 1), window):
        if offset >= 1:
            weights[offset - 1] = w
        else:
            observed.append((-offset, w))
    return TransformSpec(
        forecast_weights=tuple(weights),
        observed_terms=tuple(observed),
        label=f"annual-average-{year}y",
    )


def spec_yoy_from_qoq(year: int = 1) -> TransformSpec:
    """Year-on-year growth `year` years ahead: sum of the four
    quarter-on-quarter forecasts covering that year."""
    if year < 1:
        raise DataError("year must be >= 1")
    horizon = 4 * year
    weights = [0.0] * horizon
    for j in range(horizon - 3, horizon + 1):
        weights[j - 1] = 1.0
    return TransformSpec(forecast_weights=tuple(weights), label=f"yoy-{year}y")


def spec_yoy_from_mom() -> TransformSpec:
    """Year-on-year growth from twelve month-on-month forecasts."""
    return TransformSpec(forecast_weights=(1.0,) * 12, label="yoy-from-mom")


def yoy_to_mom(yoy_draws, trailing_mom):
    """Back out month-on-month draws from year-on-year draws.

    Uses the additive identity yoy_t ~ sum of the 12 mom rates ending at
    t, applied horizon by horizon so each month uses the already
    transformed earlier months of the same path.
    """
    yoy = np.asarray(yoy_draws, dtype=float)
    if yoy.ndim == 1:
        yoy = yoy[None, :]
    trailing = np.asarray(trailing_mom, dtype=float)
    if len(trailing) != 11:
        raise DataError(f"need the 11 trailing mom rates, got {len(trailing)}")
    s, h = yoy.shape
    window = np.tile(trailing, (s, 1))  # rolling last-11-months buffer
    mom = np.empty_like(yoy)
    for j in range(h):
        mom[:, j] = yoy[:, j] - window.sum(axis=1)
        window = np.column_stack([window[:, 1:], mom[:, j]])
    return mom


def mom_to_yoy(mom_draws, trailing_mom):
    """Inverse of yoy_to_mom: 12-month rolling sums of mom rates."""
    mom = np.asarray(mom_draws, dtype=float)
    if mom.ndim == 1:
        mom = mom[None, :]
    trailing = np.asarray(trailing_mom, dtype=float)
    s, h = mom.shape
    window = np.tile(trailing, (s, 1))
    yoy = np.empty_like(mom)
    for j in range(h):
        yoy[:, j] = mom[:, j] + window.sum(axis=1)
        window = np.column_stack([window[:, 1:], mom[:, j]])
    return yoy


def cum_growth(levels, t, h, order="I1"):
    """Cumulative growth of a (log-)level series between t and t+h.

    I(1): Y[t+h] - Y[t]; I(2): Y[t+h] - Y[t] - h * (Y[t] - Y[t-1]).
    """
    levels = np.asarray(levels, dtype=float)
    if t < 0 or t + h >= len(levels):
        raise DataError("indices out of range")
    if order == "I1":
        return float(levels[t + h] - levels[t])
    if order == "I2":
        if t == 0:
            raise DataError("I(2) growth needs t >= 1 (lagged level)")
        return float(levels[t + h] - levels[t] - h * (levels[t] - levels[t - 1]))
    raise DataError(f"unknown integration order {order!r}")


def quarterly_avg_from_monthly_levels(monthly_draws):
    """Average consecutive month triplets into quarterly levels, per path."""
    m = np.asarray(monthly_draws, dtype=float)
    if m.ndim == 1:
        m = m[None, :]
    if m.shape[1] % 3 != 0:
        raise DataError(f"{m.shape[1]} months do not form whole quarters")
    return m.reshape(m.shape[0], -1, 3).mean(axis=2)


# ---------------------------------------------------------------------------
# Serialization

def spec_to_json(spec: TransformSpec) -> str:
    return json.dumps({
        "forecast_weights": list(spec.forecast_weights),
        "observed_terms": [[lag, w] for lag, w in spec.observed_terms],
        "label": spec.label,
    })


def spec_from_json(text: str) -> TransformSpec:
    obj = json.loads(text)
    return TransformSpec(
        forecast_weights=tuple(obj["forecast_weights"]),
        observed_terms=tuple((int(l), float(w)) for l, w in obj.get("observed_terms", [])),
        label=obj.get("label", "custom"),
    )
