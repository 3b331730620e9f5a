"""Exception hierarchy shared by the library and the CLI."""


class KpcaError(Exception):
    """Base class for all errors raised by nyskpca."""


class InputError(KpcaError, ValueError):
    """Malformed or out-of-range input. Maps to CLI exit code 2."""


class DimensionError(InputError):
    """Shape mismatch between arrays."""


class NotPSDError(InputError):
    """A matrix expected to be positive semi-definite has a significantly negative eigenvalue."""


class UnsupportedError(InputError):
    """The requested operation is not defined for this kernel or model."""


class RankError(KpcaError):
    """Fewer numerically positive eigenvalues than requested components.

    ``achievable`` carries the largest number of components that can be fitted.
    """

    def __init__(self, message, achievable=0):
        super().__init__(message)
        self.achievable = achievable


class InsufficientDataError(KpcaError):
    """Not enough distinct points to fit a convergence rate."""


class ConfigError(InputError):
    """Bad configuration or CSV file; ``line`` is 1-based when known."""

    def __init__(self, message, line=None, path=None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.line = line
        self.path = path
