"""Exception hierarchy shared across the solver."""


class FplError(Exception):
    """Base class for solver errors."""


class UsageError(FplError):
    """Invalid configuration, arguments or file contents (CLI exit 2)."""


class NumericalError(FplError):
    """Numerical failure: non-finite values, quadrature non-convergence (CLI exit 3)."""


class QuadratureError(NumericalError):
    """Radial quadrature did not converge to the requested tolerance."""


class StabilityError(FplError):
    """Negative-part stability ratio exceeded epsilon (CLI exit 4)."""

    def __init__(self, message, t=None, ratio=None):
        super().__init__(message)
        self.t = t
        self.ratio = ratio
