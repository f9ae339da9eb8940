"""Exception hierarchy shared by every module."""


class LabError(Exception):
    """Base class for all symlab errors."""


class InputError(LabError, ValueError):
    """An argument violates a documented precondition."""


class ResolutionError(InputError):
    """A query radius is below the resolution floor of the discretization."""


class TrustedWindowError(InputError):
    """A query ball leaves the region where the truncated measure is exact."""


class PreconditionError(InputError):
    """A numerical precondition (e.g. a supplied bound) does not hold."""


class ConfigError(InputError):
    """An experiment configuration is invalid.

    Parameters
    ----------
    key : str
        Dotted path of the offending configuration entry.
    message : str
        Human readable explanation.
    """

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class QuadratureError(LabError, RuntimeError):
    """Quadrature failed to reach the requested tolerance.

    The two finest estimates are kept on the exception so callers can decide
    whether the result is still usable.
    """

    def __init__(self, message, coarse, fine):
        self.coarse = coarse
        self.fine = fine
        super().__init__(message)


class SolverError(LabError, RuntimeError):
    """The Lipschitz-dual solver did not certify its answer."""

    def __init__(self, message, gap=None):
        self.gap = gap
        super().__init__(message)
