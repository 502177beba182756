"""Exception types shared across the package."""


class RmfError(Exception):
    """Base class for package errors."""


class CapacityError(RmfError, MemoryError):
    """Requested table or grid exceeds the configured memory budget."""


class CoverageError(RmfError, ValueError):
    """A value was requested outside what a table or sample covers."""


class PreconditionError(RmfError, ValueError):
    """Arguments violate an operation's stated preconditions."""


class DecompositionError(RmfError, ArithmeticError):
    """A covariance matrix is indefinite beyond roundoff tolerance."""
