class InvalidGraphError(ValueError):
    """Raised when a graph does not have the structure an operation requires."""


class InvalidArgumentError(ValueError):
    pass


class ConfigError(ValueError):
    """Raised for generator or experiment settings that cannot be honoured."""


class UndefinedMetricError(ValueError):
    pass
