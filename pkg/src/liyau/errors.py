"""Exception hierarchy shared by all modules."""


class LiyauError(Exception):
    """Base class for every error raised by the package."""


class DomainError(LiyauError, ValueError):
    """An argument lies outside the domain of an operation."""


class PreconditionError(LiyauError, ValueError):
    """A documented precondition of an operation does not hold."""


class RegularityError(PreconditionError):
    """A graph is not regular where a regular neighbourhood is required."""


class AccuracyError(LiyauError, RuntimeError):
    """A numerical routine could not reach its accuracy target."""


class ConsistencyError(LiyauError, RuntimeError):
    """An internal self-check failed; indicates a bug, not bad input."""
