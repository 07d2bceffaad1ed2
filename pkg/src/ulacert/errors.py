"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: configuration problems exit with 1,
infeasible constants with 2 and failed validations with 3.
"""


class UlacertError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 1


class ConfigurationError(UlacertError, ValueError):
    """Missing, inconsistent or unknown inputs (route/class mismatch, bad keys)."""

    exit_code = 1


class DomainError(ConfigurationError):
    """An argument lies outside the domain of a formula (e.g. lambda not in (0, 1))."""


class EvaluationError(UlacertError, ArithmeticError):
    """A potential returned a non-finite value or gradient."""

    exit_code = 1


class InfeasibleError(UlacertError):
    """Constants evaluate to something unusable (kappa >= 1, step above its cap, ...)."""

    exit_code = 2


class NumericRangeError(InfeasibleError):
    """A quantity stays non-finite even after log-space evaluation."""


class DivergenceError(UlacertError, FloatingPointError):
    """A simulated chain left the finite range."""

    exit_code = 2

    def __init__(self, message, *, step=None, chain=None, state=None):
        super().__init__(message)
        self.step = step
        self.chain = chain
        self.state = state


class GridTooSmallError(UlacertError):
    """The 1-D grid oracle lost more mass than the truncation budget allows."""

    exit_code = 2

    def __init__(self, message, *, suggested=None):
        super().__init__(message)
        self.suggested = suggested


class ValidationFailure(UlacertError, AssertionError):
    """An asserted inequality (bound >= oracle, drift margin, ...) was violated."""

    exit_code = 3
