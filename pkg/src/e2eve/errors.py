"""Exception types shared across the pipeline."""


class E2eveError(Exception):
    """Base class for all package errors."""


class NoImages(E2eveError):
    """A source directory contained no decodable images."""


class IOFailure(E2eveError):
    """An output location could not be written."""


class MaskShapeMismatch(E2eveError):
    """A mask file does not match the manifest image size."""


class EmptyMask(E2eveError):
    """An edit region must contain at least one pixel."""


class InfeasibleRegion(E2eveError):
    """No rectangle satisfying the area/aspect constraints fits the image."""


class InfeasibleCrop(E2eveError):
    """No sub-crop placement exists, even after shrinking alpha to its minimum."""


class ShapeError(E2eveError):
    """Array dimensions are inconsistent with the operation's contract."""


class InvalidToken(E2eveError):
    """A token index falls outside the relevant codebook vocabulary."""


class DivergenceError(E2eveError):
    """Training produced a non-finite loss."""


class SequenceTooLong(E2eveError):
    """A token sequence exceeds the model's maximum length."""


class ModelMismatch(E2eveError):
    """Quantizer checkpoints do not match the hashes the generator was trained against."""


class InvalidRequest(E2eveError):
    """A sampling/filtering request is internally inconsistent."""


class InsufficientData(E2eveError):
    """Not enough images available to build the requested evaluation set."""


class Unsupported(E2eveError):
    """The loaded model does not support the requested operation."""
