class RareError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(RareError, ValueError):
    """An invalid hyperparameter or argument value.

    ``field`` names the offending setting so front-ends can map it to a flag.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


class DimensionError(RareError, ValueError):
    """Operand shapes are incompatible for the requested operation."""


class GraphFormatError(RareError, ValueError):
    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


class NumericalError(RareError, FloatingPointError):
    """Training produced a non-finite loss."""

    def __init__(self, iteration, components):
        parts = ", ".join(f"{k}={v!r}" for k, v in components.items())
        super().__init__(f"non-finite loss at iteration {iteration}: {parts}")
        self.iteration = iteration
        self.components = dict(components)
