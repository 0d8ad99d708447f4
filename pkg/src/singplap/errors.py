"""Exception hierarchy shared by every module."""


class SingPlapError(Exception):
    """Base class for all package errors."""


class InvalidExponent(SingPlapError, ValueError):
    pass


class InvalidDomain(SingPlapError, ValueError):
    pass


class OutsideDomain(SingPlapError, ValueError):
    pass


class RegimeError(SingPlapError, ValueError):
    """Operation is undefined for the requested singularity regime."""


class DomainError(SingPlapError, ValueError):
    """Argument outside the mathematical domain of a formula."""


class NormalizationError(SingPlapError, ValueError):
    pass


class MeshMismatch(SingPlapError, ValueError):
    pass


class WindowUnresolved(SingPlapError, ValueError):
    pass


class ReflectionLeavesDomain(SingPlapError, ValueError):
    pass


class AsymmetricDomain(SingPlapError, ValueError):
    pass


class TooCloseToBoundary(SingPlapError, ValueError):
    pass


class ConfigError(SingPlapError, ValueError):
    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key


class NoConvergence(SingPlapError, RuntimeError):
    """Nonlinear or eigen iteration hit its cap; ``last_iterate`` is attached."""

    def __init__(self, message, last_iterate=None, history=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.history = history or []


class NegativeIterate(SingPlapError, RuntimeError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node
