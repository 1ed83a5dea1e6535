"""Exception hierarchy shared across the package."""


class DrMlsadError(Exception):
    """Base class for all package errors."""


class InvalidDataError(DrMlsadError, ValueError):
    """Raised when a returns panel violates its invariants."""


class EmptySetError(DrMlsadError, ValueError):
    """Raised when the constraint set {e'x = 1, x >= 0, mu'x >= b} is empty."""


class InfeasibleProblemError(DrMlsadError, ValueError):
    """Raised when a problem instance has no feasible portfolio."""


class InfeasibleTargetError(InfeasibleProblemError):
    """Raised when a target return lies outside [min mu_i, max mu_i]."""


class LineSearchStall(DrMlsadError, RuntimeError):
    """Raised when the Armijo step length underflows."""


class IndefiniteSystemError(DrMlsadError, RuntimeError):
    """Raised when the regularized Newton matrix is not positive definite."""


class DegenerateDenominatorError(DrMlsadError, ValueError):
    """Raised when every support index has E[xi_i] == target return."""


class InsufficientHistoryError(DrMlsadError, ValueError):
    """Raised when too few out-of-sample periods exist for a metric."""


class WindowInfeasibleError(DrMlsadError, RuntimeError):
    """Raised when a rolling window yields an infeasible problem."""

    def __init__(self, window, message=None):
        self.window = window
        super().__init__(message or f"window {window} is infeasible")


class ParseError(DrMlsadError, ValueError):
    """Raised on malformed CSV input; carries the 1-based line number."""

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class MissingValuesError(DrMlsadError, ValueError):
    """Raised when an asset column contains missing-value sentinels."""

    def __init__(self, asset):
        self.asset = asset
        super().__init__(f"asset {asset!r} contains missing values")
