"""Exception types shared across the package."""


class BoseDimerError(Exception):
    """Base class for all package errors."""


class ParameterError(BoseDimerError, ValueError):
    """A parameter lies outside its physical domain."""


class ConfigError(BoseDimerError, ValueError):
    """A configuration object does not match the expected schema."""


class NumericalError(BoseDimerError, RuntimeError):
    """A numerical routine failed; ``diagnostics`` carries what is known."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class StiffnessError(NumericalError):
    """The adaptive integrator could not make progress."""


class NaNError(NumericalError):
    """A non-finite value appeared during integration."""


class SingularCoordinatesError(BoseDimerError, ValueError):
    """Polar coordinates are undefined because an amplitude vanishes."""


class InconclusiveClassification(BoseDimerError):
    """Phase diagnostics straddle the decision thresholds."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class EigensolverError(NumericalError):
    """An eigenvalue computation did not converge."""


class DimensionError(BoseDimerError, ValueError):
    """A requested operator exceeds the configured dimension cap."""


class MissingSectorError(BoseDimerError, KeyError):
    """Observables were requested from blocks that were never initialised."""


class SeriesTooShortError(BoseDimerError, ValueError):
    """A time series is too short for the requested spectral resolution."""


class EmptyWindowError(BoseDimerError, ValueError):
    """An averaging window contains no samples."""
