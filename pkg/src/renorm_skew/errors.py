"""Exception hierarchy; each class carries the CLI exit code it maps to."""


class RenormError(Exception):
    """Base class for library errors."""

    exit_code = 5


class InvalidInput(RenormError, ValueError):
    exit_code = 3


class RationalInput(InvalidInput):
    """An irrational number was required."""


class ConfigError(InvalidInput):
    exit_code = 3


class CapExceeded(RenormError):
    """A configured size or iteration cap was hit."""

    exit_code = 4


class NoPeriodFound(CapExceeded):
    pass


class TooLarge(CapExceeded):
    pass


class CheckFailed(RenormError):
    """A numerical certificate did not hold."""

    exit_code = 1


class NoDrift(CheckFailed):
    pass


class SpectralAnomaly(CheckFailed):
    pass


class ExtensionFailed(CheckFailed):
    pass


class CenteringFailed(CheckFailed):
    pass


class ConventionMismatch(CheckFailed):
    pass


class DegenerateCocycle(CheckFailed):
    pass


class NotAdapted(CheckFailed):
    pass


class GapTooSmall(CheckFailed):
    pass


class DKViolation(CheckFailed):
    pass


class InsufficientLevel(InvalidInput):
    pass
