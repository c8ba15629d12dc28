"""Exception hierarchy shared across the package."""


class HorizonFuseError(Exception):
    """Base class for all package errors."""


class DataError(HorizonFuseError):
    """Invalid, missing, or misaligned input data."""


class EstimationError(HorizonFuseError):
    """A statistical estimation step could not be carried out."""


class NumericalError(HorizonFuseError):
    """A numerical routine failed (pivot breakdown, non-convergence)."""


class FitError(NumericalError):
    """Optimizer non-convergence; carries the best iterate found so far."""

    def __init__(self, message, best_params=None, residual=None):
        super().__init__(message)
        self.best_params = best_params
        self.residual = residual
