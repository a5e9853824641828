"""Exception types raised across the package."""

__all__ = [
    "DppfitError",
    "ValidationError",
    "TruncationError",
    "PatternFormatError",
    "PointOutsideWindow",
    "EmptyErosion",
    "ZeroIntensity",
    "NegativeStatistic",
    "NonPositiveStatistic",
    "NotInvertible",
    "OptimizerFailure",
    "StudyAborted",
    "NormalityUndefined",
    "ConfigError",
]


class DppfitError(Exception):
    """Base class for all errors raised by dppfit."""


class ValidationError(DppfitError):
    """A kernel model violates the existence conditions.

    The offending :class:`~dppfit.kernels.ValidationReport` is kept on
    ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class TruncationError(DppfitError):
    """A spectral or spatial truncation could not reach its target."""


class PatternFormatError(DppfitError):
    """Malformed pattern file. ``line`` is 1-based."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class PointOutsideWindow(DppfitError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyErosion(DppfitError):
    """The eroded window has zero volume at distance ``t``."""

    def __init__(self, t):
        super().__init__(f"eroded window is empty at t={t!r}")
        self.t = t


class ZeroIntensity(DppfitError):
    """The pattern has no points, so the intensity estimate is zero."""


class NegativeStatistic(DppfitError):
    """A fractional power of a negative summary value was requested."""


class NonPositiveStatistic(DppfitError):
    """A negative power of a non-positive summary value was requested."""


class NotInvertible(DppfitError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class OptimizerFailure(DppfitError):
    pass


class StudyAborted(DppfitError):
    """Too many replicates failed in a Monte Carlo study cell."""


class NormalityUndefined(DppfitError):
    """Normality diagnostics need a sample with positive variance."""


class ConfigError(DppfitError):
    pass
