"""Exception types raised across the package."""


class Error(Exception):
    """Base class for all package errors."""


class MalformedLineError(Error):
    def __init__(self, lineno, reason):
        super().__init__(f"line {lineno}: {reason}")
        self.lineno = lineno
        self.reason = reason


class EmptyInputError(Error):
    pass


class DegenerateRangeError(Error):
    pass


class EmptyWeightsError(Error):
    pass


class NonPositiveWeightError(Error):
    pass


class WindowTooLargeError(Error):
    pass


class DimensionMismatchError(Error):
    pass


class ShapeMismatchError(Error):
    pass


class OutOfVocabError(Error):
    pass


class EmptyCorpusError(Error):
    pass


class FormatError(Error):
    def __init__(self, path, lineno, reason):
        super().__init__(f"{path}:{lineno}: {reason}")
        self.path = path
        self.lineno = lineno
        self.reason = reason


class InsufficientNonNeighborsError(Error):
    pass


class NotEnoughNegativesError(Error):
    pass


class MissingNodeError(Error):
    pass


class SingleClassError(Error):
    pass


class LengthMismatchError(Error):
    pass


class TooFewSnapshotsError(Error):
    pass


class ConfigError(Error):
    pass
