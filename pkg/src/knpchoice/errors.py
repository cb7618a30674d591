"""Exception taxonomy.

ValidationError covers bad inputs, configs, and file formats (CLI exit 1);
NumericalError covers optimization and resampling failures on valid inputs
(CLI exit 2).
"""


class KnpChoiceError(Exception):
    """Base class for package-specific failures."""


class ValidationError(KnpChoiceError, ValueError):
    """Invalid data, configuration, or file contents."""


class RankError(ValidationError):
    """Requested spectral truncation exceeds the usable gram rank."""


class NumericalError(KnpChoiceError, RuntimeError):
    """A numerical procedure failed on otherwise valid inputs."""


class FitError(NumericalError):
    """No optimizer restart reached a stationary point."""
