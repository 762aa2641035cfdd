"""Exception types raised across the package."""


class BowenLabError(Exception):
    """Base class for all package errors."""


class InvalidWordError(BowenLabError, ValueError):
    """A word uses a symbol outside its level alphabet."""


class DomainError(BowenLabError, ValueError):
    """A point lies outside the domain box."""


class CapacityError(BowenLabError):
    """An enumeration would exceed the configured word-count cap."""


class PreconditionError(BowenLabError, ValueError):
    """An operation was called without its documented precondition."""


class InconsistencyError(BowenLabError):
    """Evaluations contradict an assumed monotonicity."""


class ConstructionError(BowenLabError):
    """The Moran construction produced an empty child set."""


class ConfigError(BowenLabError, ValueError):
    """A configuration document failed to parse or validate."""
