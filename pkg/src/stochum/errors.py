"""Exception taxonomy shared across the toolkit.

Two failure families matter operationally: bad inputs (geometry, parameter
ranges, shape mismatches — things a config validator should catch) and
numerical breakdown (non-finite values produced or consumed mid-computation).
The CLI maps them to distinct exit codes.
"""

__all__ = ["StochumError", "ParameterError", "NumericError"]


class StochumError(Exception):
    """Base class for all toolkit-raised errors."""


class ParameterError(StochumError, ValueError):
    """Invalid parameters, geometry, domains, or field shapes."""


class NumericError(StochumError, ArithmeticError):
    """Non-finite data or numerically meaningless state."""
