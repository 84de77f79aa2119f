"""Exception hierarchy shared by every module."""


class BesovLabError(Exception):
    """Base class for all library errors."""


class ConfigurationError(BesovLabError, ValueError):
    """Invalid grid, operator, or experiment configuration."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DomainError(BesovLabError, ValueError):
    """A parameter lies outside the mathematical domain of an operation."""


class PreconditionError(BesovLabError, ValueError):
    """An operation was called with inputs violating its precondition."""


class UnsupportedSizeError(BesovLabError, ValueError):
    """The requested computation does not fit the dense/desk-scale budget."""


class NumericalError(BesovLabError, RuntimeError):
    """A numerical routine failed to converge or lost accuracy."""

    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)
