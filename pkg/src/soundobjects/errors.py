"""Exception hierarchy shared by all pipeline stages."""


class SoundObjectsError(Exception):
    """Base class for every error raised by this package."""


class UnreadableFile(SoundObjectsError):
    pass


class UnsupportedEncoding(SoundObjectsError):
    pass


class TooShort(SoundObjectsError):
    pass


class InvalidRange(SoundObjectsError):
    pass


class SampleRateMismatch(SoundObjectsError):
    pass


class IndexOutOfRange(SoundObjectsError):
    pass


class AmplitudeTooLow(SoundObjectsError):
    pass


class LengthMismatch(SoundObjectsError):
    pass


class TooFewPoints(SoundObjectsError):
    pass


class NoHarmonicStructure(SoundObjectsError):
    pass


class NoFundamental(SoundObjectsError):
    pass


class InsufficientShiftSamples(SoundObjectsError):
    pass


class NoStrongHarmonics(SoundObjectsError):
    pass


class AllAgesMissing(SoundObjectsError):
    pass


class SingleClassTrainingSet(SoundObjectsError):
    pass


class SingleClassEvaluationSet(SoundObjectsError):
    pass


class ClassTooSmall(SoundObjectsError):
    pass


class SpecInvalid(SoundObjectsError):
    pass


class MissingLabel(SoundObjectsError):
    pass


class DatasetError(SoundObjectsError):
    pass
