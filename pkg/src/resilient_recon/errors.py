"""Exception hierarchy. CLI exit codes hang off these classes."""


class ReconError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(ReconError, ValueError):
    exit_code = 2


class DomainError(ReconError, ValueError):
    """An argument is outside the mathematical domain of the operation."""

    exit_code = 2


class NumericError(ReconError, ArithmeticError):
    exit_code = 3


class RankDeficientError(NumericError):
    """Row selection does not have full column rank.

    Carries the offending smallest singular value so callers can fall back
    to the ball-constrained solver.
    """

    def __init__(self, sigma_min, message=None):
        self.sigma_min = float(sigma_min)
        super().__init__(message or f"rank-deficient selection (sigma_min={self.sigma_min:.3e})")


class ConvergenceError(NumericError):
    def __init__(self, message, **diagnostics):
        self.diagnostics = diagnostics
        super().__init__(f"{message} {diagnostics}" if diagnostics else message)


class InfeasibleError(ReconError):
    exit_code = 4


class BudgetExceededError(InfeasibleError):
    """An exhaustive enumeration would exceed its configured budget."""
