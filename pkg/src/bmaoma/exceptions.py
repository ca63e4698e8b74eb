"""Exception hierarchy shared across the package."""


class BmaomaError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(BmaomaError, ValueError):
    """Arguments violate a documented precondition (shape, range, simplex)."""


class NumericalFailure(BmaomaError, ArithmeticError):
    """A computation produced NaN/Inf or a solver failed to converge."""


class FormatError(BmaomaError, ValueError):
    """A file does not follow the expected binary or JSON layout."""


class DataError(BmaomaError, ValueError):
    """A well-formed file carries invalid values (non-finite, out of range)."""
