"""Exception types raised across the toolkit."""


class WssError(Exception):
    """Base class for every error raised by wsscues."""


class DecodeError(WssError):
    pass


class UnsupportedFormat(WssError):
    pass


class EncodeError(WssError):
    pass


class PaletteMismatch(WssError):
    pass


class ShapeError(WssError, ValueError):
    pass


class DTypeError(WssError, TypeError):
    pass


class ZeroDimension(WssError, ValueError):
    pass


class DimensionMismatch(WssError, ValueError):
    pass


class KindError(WssError, ValueError):
    """A raw score map was passed where a probability map is required."""


class ClassOutOfRange(WssError, ValueError):
    pass


class EmptyCues(WssError, ValueError):
    """The seeding loss is undefined for a cue set with no elements."""


class EmptyPrediction(WssError, ValueError):
    pass


class EmptyMatrix(WssError, ValueError):
    pass


class IgnoreInPrediction(WssError, ValueError):
    pass


class LengthMismatch(WssError, ValueError):
    pass


class ConfigError(WssError, ValueError):
    pass
