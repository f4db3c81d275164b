"""Exception types shared across the package."""


class CdcovError(Exception):
    """Base class for all package errors."""


class InvalidInputError(CdcovError):
    """Raised when an argument violates a documented precondition."""


class NumericalError(CdcovError):
    """Raised when a numerical routine fails to reach its tolerance.

    The best available iterate, if any, is attached as ``best``.
    """

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class UsageError(CdcovError):
    """Raised for malformed CLI configuration (maps to exit code 2)."""
