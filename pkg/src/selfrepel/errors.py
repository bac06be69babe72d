"""Exception hierarchy shared by the simulation and analysis layers."""


class SelfRepelError(Exception):
    """Base class for all package errors."""


class ModelError(SelfRepelError, ValueError):
    pass


class NonPositiveCoefficient(ModelError):
    pass


class DimensionMismatch(ModelError):
    pass


class ConfigError(SelfRepelError, ValueError):
    """Raised for unreadable or invalid run configurations."""


class NonFiniteState(SelfRepelError, FloatingPointError):
    """A stepper produced inf/nan. Almost always means dt is too large."""

    def __init__(self, message, time=None, path_index=None):
        super().__init__(message)
        self.time = time
        self.path_index = path_index


class ShapeMismatch(SelfRepelError, ValueError):
    pass


class NotStationaryInit(SelfRepelError, ValueError):
    pass


class EmptySample(SelfRepelError, ValueError):
    pass


class InsufficientSamples(SelfRepelError, ValueError):
    pass


class NoDecayWindow(SelfRepelError, ValueError):
    pass


class WindowTooShort(SelfRepelError, ValueError):
    pass


class NoMixingFit(SelfRepelError, ValueError):
    pass
