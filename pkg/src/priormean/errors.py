"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """Input outside an operation's domain (non-finite, wrong shape, out of cube)."""


class SingularKernelError(ArithmeticError):
    """Kernel matrix stayed non positive definite after the maximum jitter."""


class SingularSystemError(ArithmeticError):
    """Unregularised least-squares system has no unique solution."""


class DataCorruptionError(RuntimeError):
    """A recorded value is impossible, e.g. an observation below the known optimum."""


class UndefinedRangeError(ValueError):
    """Normalising range is zero."""


class PairingError(ValueError):
    """Records that should be paired by repeat index are not."""
