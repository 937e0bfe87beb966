"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np

from .exceptions import (
    DimensionMismatch,
    InvalidAlpha,
    LabelOutOfRange,
    NonFiniteData,
    NonPositiveSigma,
    TooFewSamples,
)


def as_sample_matrix(points, min_samples: int = 2) -> np.ndarray:
    """Coerce a list of flat sample vectors to a float64 (N, D) array.

    A 1-D input is treated as N scalar samples. Ragged inputs raise
    DimensionMismatch, fewer than ``min_samples`` rows raise TooFewSamples.
    """
    try:
        x = np.asarray(points, dtype=np.float64)
    except ValueError as exc:
        raise DimensionMismatch("sample vectors have unequal lengths") from exc
    if x.dtype == object:
        raise DimensionMismatch("sample vectors have unequal lengths")
    if x.ndim == 0:
        raise DimensionMismatch("expected a list of sample vectors, got a scalar")
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2:
        x = x.reshape(x.shape[0], -1)
    if x.shape[0] < min_samples:
        raise TooFewSamples(f"need at least {min_samples} samples, got {x.shape[0]}")
    if x.shape[1] < 1:
        raise DimensionMismatch("sample vectors must have at least one component")
    return x


def check_sigma(sigma: float) -> float:
    sigma = float(sigma)
    if not sigma > 0:
        raise NonPositiveSigma(f"kernel width must be > 0, got {sigma}")
    return sigma


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not alpha > 0:
        raise InvalidAlpha(f"entropy order must be > 0, got {alpha}")
    return alpha


def check_finite(values: np.ndarray, what: str = "data") -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise NonFiniteData(f"{what} contains NaN or Inf")
    return values


def as_label_vector(labels, num_classes: int) -> np.ndarray:
    """Coerce labels to a 1-D int array and check the [0, num_classes) range."""
    y = np.asarray(labels)
    if y.ndim != 1:
        y = y.reshape(-1)
    if y.dtype.kind == "f":
        rounded = np.rint(y)
        if not np.all(np.isfinite(y)) or np.any(np.abs(y - rounded) > 0):
            raise LabelOutOfRange("labels must be integers")
        y = rounded
    y = y.astype(np.int64)
    if y.size and (y.min() < 0 or y.max() >= num_classes):
        raise LabelOutOfRange(
            f"labels must lie in [0, {num_classes}), got range "
            f"[{y.min()}, {y.max()}]"
        )
    return y
