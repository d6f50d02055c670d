"""Exception hierarchy for asln."""


class AslnError(Exception):
    """Base class for every error raised by asln."""


class DimensionError(AslnError, ValueError):
    """Input shapes are inconsistent or a matrix lacks a required structure."""


class ConfigurationError(AslnError, ValueError):
    """Invalid experiment or process configuration."""


class UnknownPresetError(ConfigurationError):
    """Requested preset does not exist."""


class SingularityError(AslnError, ArithmeticError):
    """A matrix that must be invertible (or full rank) is not."""


class RankError(SingularityError):
    """Requested number of components exceeds the numerical rank."""


class DivergenceError(AslnError, ArithmeticError):
    """A learning rule blew up.

    Attributes:
        epoch: Epoch at which the weight norm exceeded the limit.
    """

    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch


class AlignmentError(AslnError, ValueError):
    """Sources and estimates cannot be matched (e.g. a constant column)."""


class NotApplicableError(AslnError, ValueError):
    """A closed-form prediction was asked for outside its assumptions."""


class ContainerFormatError(AslnError, ValueError):
    """Binary dump is truncated or carries the wrong magic/tag."""
