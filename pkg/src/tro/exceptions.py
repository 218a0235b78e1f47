"""Exception hierarchy shared by every module."""


class TROError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(TROError, ValueError):
    """A vector, instance or argument failed validation."""


class InvalidConfigError(TROError, ValueError):
    """A configuration value is out of range or inconsistent."""


class InfeasibleDomainError(TROError, ValueError):
    """Two balls whose intersection is empty were asked to be projected on."""


class InfeasibleTargetError(TROError, ValueError):
    """The target risk is below the optimal risk of the instance."""


class PreconditionError(TROError, ValueError):
    """A verification check was called outside its domain of validity."""


class NumericalFailureError(TROError, RuntimeError):
    """An iterative routine did not converge.

    Attributes
    ----------
    last_iterate : numpy.ndarray or None
        The iterate at the moment the routine gave up.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate
