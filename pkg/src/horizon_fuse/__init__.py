"""horizon-fuse: joint predictive distributions from direct multi-horizon
density forecasts via a Gaussian copula, with target-frequency
transformations, proper scoring, and simulation studies."""

__version__ = "0.1.0"

from .archive import ArchiveRecord, ForecastArchive, load_archive, save_archive
from .copula import (
    CorrelationMatrix,
    PitPanel,
    cholesky_factor,
    fit_copula,
    nearest_correlation,
    pit_corr_theoretical,
    sample_joint,
)
from .dists import (
    NormalParams,
    QuantileGrid,
    SkewShapeParams,
    calibrate_skew_shape,
    cdf,
    fit_skewt_to_quantiles,
    interp_cdf,
    interp_sample,
    pdf,
    quantile,
    repair_crossing,
    sample,
)
from .errors import (
    DataError,
    EstimationError,
    FitError,
    HorizonFuseError,
    NumericalError,
)
from .transform import TransformSpec, apply_transform

__all__ = [
    "__version__",
    "ArchiveRecord", "ForecastArchive", "load_archive", "save_archive",
    "CorrelationMatrix", "PitPanel", "cholesky_factor", "fit_copula",
    "nearest_correlation", "pit_corr_theoretical", "sample_joint",
    "NormalParams", "QuantileGrid", "SkewShapeParams", "calibrate_skew_shape",
    "cdf", "fit_skewt_to_quantiles", "interp_cdf", "interp_sample", "pdf",
    "quantile", "repair_crossing", "sample",
    "DataError", "EstimationError", "FitError", "HorizonFuseError",
    "NumericalError",
    "TransformSpec", "apply_transform",
]
