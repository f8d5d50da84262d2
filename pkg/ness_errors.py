"""Exception hierarchy shared by every NESS module.

Each error carries a short ``reason`` code so experiment sweeps can tally
failures without parsing messages.
"""

from typing import Optional


class NessError(Exception):
    """Base class for all library errors"""

    reason = "ness_error"

    def __init__(self, message: str, reason: Optional[str] = None):
        super().__init__(message)
        if reason is not None:
            self.reason = reason


class NotSquareError(NessError):
    reason = "not_square"


class NotHermitianError(NessError):
    reason = "not_hermitian"


class NotPsdError(NessError):
    reason = "not_psd"


class SingularGeneratorError(NessError):
    reason = "singular_generator"


class SolverResidualError(NessError):
    reason = "solver_residual"


class InvalidCovarianceError(NessError):
    reason = "invalid_covariance"


class StatisticsMismatchError(NessError):
    reason = "statistics_mismatch"


class DegenerateChannelsError(NessError):
    reason = "degenerate_channels"


class UnstableError(NessError):
    reason = "unstable"


class NumericallyMarginalError(UnstableError):
    reason = "numerically_marginal"


class DegenerateSpectrumError(NessError):
    reason = "degenerate_spectrum"


class NotUnitaryError(NessError):
    reason = "not_unitary"


class NegativeCurrentError(NessError):
    reason = "negative_current"


class ConfigError(NessError):
    reason = "config_error"


class SymbolNotPsdError(NotPsdError):
    """A ribbon symbol failed the PSD check at a quadrature node"""

    reason = "symbol_not_psd"

    def __init__(self, x: float, symbol: str, min_eigenvalue: float):
        super().__init__(
            f"Symbol {symbol}(x) is not PSD at x={x!r} "
            f"(smallest eigenvalue {min_eigenvalue:.3e})"
        )
        self.x = x
        self.symbol = symbol
        self.min_eigenvalue = min_eigenvalue
