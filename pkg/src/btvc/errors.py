"""Exception types raised by the package.

The CLI maps :class:`InputError` subclasses to exit code 2 and everything
else derived from :class:`BtvcError` to exit code 1.
"""


class BtvcError(Exception):
    """Base class for all package errors."""


class InputError(BtvcError):
    """Malformed input file or configuration document."""


class ParameterError(BtvcError, ValueError):
    """A parameter is outside its valid domain."""


class ConstraintError(ParameterError):
    """Parameters violate a model constraint such as the long-run variance bound."""


class NumericError(BtvcError, ArithmeticError):
    """A numerical procedure failed, e.g. a non-positive pivot in a factorization."""

    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


class DivergenceError(BtvcError):
    """The sampler could not produce an admissible proposal for too long."""

    def __init__(self, message: str, last_state: dict | None = None):
        super().__init__(message)
        self.last_state = last_state or {}
