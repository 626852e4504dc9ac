"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: validation problems exit with 2,
solver divergence with 3, failed accuracy gates with 4.
"""


class SSMHDError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class UsageError(SSMHDError, ValueError):
    """Bad arguments or configuration."""

    exit_code = 2


class DomainError(UsageError):
    """Argument outside the mathematical domain of an operation (e.g. t <= 0)."""


class UnsupportedOrderError(UsageError):
    """Derivative order beyond what is implemented in closed form."""


class SamplingError(UsageError):
    """A sampled function returned a non-finite value."""

    def __init__(self, message, coordinate=None):
        super().__init__(message)
        self.coordinate = coordinate


class FormatError(SSMHDError):
    """Malformed SSMHD1 field file."""

    exit_code = 2


class BinningError(UsageError):
    """A radial shell used in a decay fit contains no grid nodes."""


class AccuracyError(SSMHDError):
    """A numerical accuracy gate failed."""

    exit_code = 4


class DivergenceError(SSMHDError):
    """Fixed-point iteration diverged; ``history`` holds the sup-norm deltas."""

    exit_code = 3

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)
