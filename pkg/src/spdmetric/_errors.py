"""Exception hierarchy shared by every module.

The CLI maps each class onto a stable exit code, so library callers and
scripts see the same failure taxonomy.
"""


class SpdMetricError(Exception):
    """Base class for all errors raised by :mod:`spdmetric`."""


class ShapeError(SpdMetricError, ValueError):
    """Operands have incompatible orders or dimensions."""


class NumericalError(SpdMetricError, ArithmeticError):
    """A numerical routine failed (non-SPD input, divergence, bad pivot)."""


class RangeError(NumericalError, OverflowError):
    """A result would overflow the floating point range."""


class InsufficientDataError(SpdMetricError, ValueError):
    """Too few samples, items or constraints for the requested operation."""


class ConfigError(SpdMetricError, ValueError):
    """Invalid parameters or protocol configuration."""


class FormatError(SpdMetricError, ValueError):
    """A text file could not be parsed."""
