"""Exception hierarchy shared by every funkernel module."""


class FunkernelError(Exception):
    """Base class for all errors raised by funkernel."""


class InvalidGridError(FunkernelError, ValueError):
    pass


class IncompatibleError(FunkernelError, ValueError):
    """Inputs that cannot be combined (grid, dimension or sample mismatch)."""


class IncompatibleGridsError(IncompatibleError):
    pass


class DimensionError(IncompatibleError):
    pass


class UnsupportedEvaluationError(FunkernelError, ValueError):
    pass


class DataError(FunkernelError, ValueError):
    """Malformed or inconsistent input data."""


class IntegrityError(DataError):
    pass


class ParseError(DataError):
    pass


class UnsupportedVersionError(DataError):
    pass


class NumericalError(FunkernelError, ArithmeticError):
    """Linear solve failed; ``min_eigenvalue`` holds the diagnostic when known."""

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class ConfigError(FunkernelError, ValueError):
    pass
