"""Exception hierarchy.

Two broad families matter for exit-code mapping in the CLI: problems with
the caller's input or with file contents (``ValidationError``, ``FormatError``,
``IoFailure``) and numerical failures arising during computation
(``NumericalError``). Everything derives from ``InfoPlaneError``.
"""


class InfoPlaneError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(InfoPlaneError, ValueError):
    """Invalid argument or malformed input data."""


class NumericalError(InfoPlaneError, ArithmeticError):
    """A computation failed or produced numerically meaningless results."""


class FormatError(InfoPlaneError):
    """A file does not conform to an expected on-disk format."""


# -- input validation ------------------------------------------------------

class NonPositiveSigma(ValidationError):
    """Kernel width must be strictly positive."""


class InvalidAlpha(ValidationError):
    """Entropy order must be strictly positive."""


class DimensionMismatch(ValidationError):
    """Sample vectors do not share a common length."""


class TooFewSamples(ValidationError):
    """An operation needs at least two samples."""


class SizeMismatch(ValidationError):
    """Two matrices (or batches) disagree on sample count."""


class ZeroDiagonal(ValidationError):
    """A Gram matrix has a non-positive diagonal entry."""


class ZeroNorm(ValidationError):
    """Kernel alignment is undefined for an all-zero matrix."""


class DegenerateDistances(ValidationError):
    """All samples coincide, so no distance scale exists for the width grid."""


class LabelOutOfRange(ValidationError):
    """A class label falls outside [0, num_classes)."""


class BatchMismatch(ValidationError):
    """Batches within one iteration disagree on sample count or iteration."""


class TooFewLayers(ValidationError):
    """A layer-chain report needs at least two layers."""


class EmptyClass(ValidationError):
    """Every class count must be positive."""


class EmptyTrajectory(ValidationError):
    """A trajectory operation received no points."""


class InvalidSpec(ValidationError):
    """A synthetic-dataset or model specification is inconsistent."""


class NonFiniteData(ValidationError):
    """NaN or Inf values are not admitted into the pipeline."""


# -- numerical failures ----------------------------------------------------

class SpectrumFailure(NumericalError):
    """The symmetric eigensolver did not converge."""


class NegativeEigenvalue(NumericalError):
    """An eigenvalue fell below the PSD tolerance (-1e-8)."""


class DegenerateTrace(NumericalError):
    """A Hadamard-product trace underflowed below 1e-300.

    This is the documented collapse of the multivariate joint-entropy route
    when many channel matrices are multiplied elementwise; the tensor route
    does not suffer from it.
    """


class DivergedTraining(NumericalError):
    """Training loss became NaN."""


# -- file handling ---------------------------------------------------------

class ParseError(FormatError):
    """Magic, version, or size field of a dump/manifest does not check out."""


class IoFailure(InfoPlaneError):
    """An underlying OS read or write failed."""
