"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class NumericOverflowError(ArithmeticError):
    """A simulation or training quantity became non-finite."""

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class ZeroVarianceError(ValueError):
    """PCA was asked to find directions in data that does not vary."""


class RunFormatError(IOError):
    """A run directory is missing a file or a file is malformed."""
