"""Exception hierarchy shared across darksynth."""


class DarkSynthError(Exception):
    """Base class for all library errors."""


class InvariantViolation(DarkSynthError, ValueError):
    pass


class BadMagic(DarkSynthError, ValueError):
    pass


class TruncatedFile(DarkSynthError, ValueError):
    pass


class QeOutOfRange(DarkSynthError, ValueError):
    pass


class NonPositiveGain(DarkSynthError, ValueError):
    pass


class InvalidLambda(DarkSynthError, ValueError):
    pass


class EmptyBank(DarkSynthError, ValueError):
    pass


class MixedGeometry(DarkSynthError, ValueError):
    pass


class UnknownGain(DarkSynthError, KeyError):
    pass


class EmptySubset(DarkSynthError, ValueError):
    pass


class NTooLarge(DarkSynthError, ValueError):
    pass


class BadCrop(DarkSynthError, ValueError):
    pass


class GeometryMismatch(DarkSynthError, ValueError):
    pass


class DegenerateSamples(DarkSynthError, ValueError):
    pass


class TooFewSamples(DarkSynthError, ValueError):
    pass


class TooFewLevels(DarkSynthError, ValueError):
    pass


class DegenerateFit(TooFewLevels):
    """PTC points carry no usable variance (noise-free flats)."""


class SaturatedRoi(DarkSynthError, ValueError):
    pass


class ConfigError(DarkSynthError, ValueError):
    pass
