"""Exception types shared across the package."""


class UniporoError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(UniporoError, ValueError):
    pass


class InconsistentMeshError(UniporoError):
    pass


class OutOfDomainError(UniporoError, ValueError):
    pass


class FactorizationError(UniporoError):
    """Raised when a sparse LU factorization fails (singular matrix)."""

    def __init__(self, message, pivot_info=None):
        super().__init__(message)
        self.pivot_info = pivot_info


class UnsupportedOperationError(UniporoError):
    pass


class ConfigError(UniporoError):
    """Configuration problem; ``line`` or ``field`` identify the culprit."""

    def __init__(self, message, line=None, field=None):
        if line is not None:
            message = f"line {line}: {message}"
        elif field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
        self.line = line
        self.field = field
