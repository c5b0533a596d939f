"""Exception hierarchy shared across the solver."""


class SolverError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(SolverError):
    """An argument lies outside the mathematical domain of the operation."""


class BracketError(SolverError):
    """A root-finding bracket does not enclose a sign change."""


class RangeError(SolverError):
    """An inversion target lies outside the function's range on the bracket."""


class NumericalError(SolverError):
    """An iterative routine failed to converge or hit a non-finite value.

    ``abscissa`` carries the offending evaluation point when one exists.
    """

    def __init__(self, message: str, abscissa: float | None = None):
        super().__init__(message)
        self.abscissa = abscissa


class RegimeError(SolverError):
    """An operation was invoked outside its parameter regime."""
