"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A physical or numerical parameter is outside its valid range."""


class ConfigError(ValueError):
    """A run configuration file or override is malformed or out of range."""


class AnalysisError(RuntimeError):
    """A finite-element solve failed (singular or indefinite system)."""


class NonFiniteObjective(RuntimeError):
    """The optimization produced a non-finite objective or constraint value."""
