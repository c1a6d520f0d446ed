"""Exception types shared across the package.

Input problems (bad files, impossible sampling requests) derive from
``ValueError`` so callers can treat them as configuration mistakes.
Numerical failures derive from :class:`NumericsError` so they can be told
apart from bad input at the command-line boundary.
"""


class ParseError(ValueError):
    """A data file could not be parsed. Messages include the line number."""


class CapacityError(ValueError):
    """A sampling request needs more samples of some class than exist."""


class NumericsError(RuntimeError):
    """Base class for numerical failures."""


class IllConditionedError(NumericsError):
    """A linear system could not be solved to acceptable accuracy."""


class DegenerateDataError(NumericsError):
    """Data has no usable variation (e.g. all points identical)."""


class QuadratureError(NumericsError):
    """Numerical integration failed to converge or self-check failed."""


class DivergenceError(NumericsError):
    """An iterative optimisation produced non-finite values."""
