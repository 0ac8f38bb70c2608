"""Exception types raised by memk."""


class MemkError(Exception):
    """Base class for all memk errors."""


class NegativeSpectralDensity(MemkError, ValueError):
    pass


class DegenerateObservable(MemkError):
    pass


class ProbeTooSmall(MemkError, ValueError):
    pass


class DimensionMismatch(MemkError, ValueError):
    pass


class GridMismatch(MemkError, ValueError):
    pass


class PositivityLost(MemkError):
    pass


class DimensionTooLarge(MemkError, ValueError):
    pass


class SignalStartsAtZero(MemkError, ValueError):
    pass


class ExtractionUnstable(MemkError):
    pass


class StepTooLarge(MemkError, ValueError):
    pass


class ZeroNormObservable(MemkError, ValueError):
    pass


class FormatError(MemkError, ValueError):
    """A file does not follow one of the memk on-disk formats."""
