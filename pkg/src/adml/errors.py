"""Exception hierarchy shared by every stage of the pipeline."""


class ADMLError(Exception):
    """Base class for data and numerical errors raised by this package."""


class DatasetError(ADMLError, ValueError):
    pass


class MalformedRow(DatasetError):
    pass


class NonNumericFeature(DatasetError):
    pass


class EmptyFile(DatasetError):
    pass


class InvalidK(DatasetError):
    pass


class NoBetweenClass(ADMLError):
    """The subset holds no sample of another class, so no patch can be built."""


class SubsetDegenerate(ADMLError):
    """No sample of a subset yields a valid patch."""


class BadDimension(ADMLError, ValueError):
    pass


class GramIllConditioned(ADMLError):
    pass


class ShapeMismatch(ADMLError, ValueError):
    pass


class SingularAggregate(ADMLError):
    pass


class ZeroAggregate(ADMLError):
    pass


class MissingDense(ADMLError):
    pass


class EmptyReference(ADMLError):
    pass


class NotOrthonormal(ADMLError, ValueError):
    pass


class WireFormatError(ADMLError):
    pass


class RankDeficientWarning(UserWarning):
    """The aggregated SVD has a (numerically) zero singular value."""


class DegenerateDataWarning(UserWarning):
    """All sampled pair distances are zero."""
