"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so library code should raise
the most specific class that applies.
"""


class SpinspectraError(Exception):
    """Base class for all package errors."""


class ValidationError(SpinspectraError, ValueError):
    """Bad parameters, malformed input files, or violated preconditions."""


class AccuracyError(SpinspectraError):
    """An integration failed its accuracy or conservation checks."""


class InvariantFailure(SpinspectraError):
    """A physics invariant check (``verify``) did not hold."""
