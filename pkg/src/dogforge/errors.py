"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage/config problems exit 2,
precondition violations exit 3, numerical failures exit 4.
"""


class DogforgeError(Exception):
    """Base class for all package errors."""


class PreconditionError(DogforgeError):
    """An operation was called with inputs that violate its contract."""


class NumericalError(DogforgeError):
    """A computation failed to meet a required numerical property."""


class ClosureError(NumericalError):
    """A curve that must close (endpoint and/or tangent) does not."""
