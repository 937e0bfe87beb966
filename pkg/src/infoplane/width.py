"""Kernel-width selection by alignment to the label kernel.

The width for each layer is chosen on every mini-batch as the grid value
maximizing the alignment between the layer's RBF Gram matrix and the label
Gram matrix, then stabilized across iterations with an exponential moving
average. The grid is linearly spaced between configurable multiples of the
mean pairwise sample distance.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import pdist

from .entropy import GramMatrix, gram_from_squared_distances, rbf_gram, squared_distances
from .exceptions import (
    DegenerateDistances,
    SizeMismatch,
    TooFewSamples,
    ValidationError,
    ZeroNorm,
)
from .validation import as_label_vector, as_sample_matrix, check_sigma


@dataclass(frozen=True)
class WidthGrid:
    """Linearly spaced width candidates, as multiples of the mean pairwise distance."""

    multiplier_lo: float = 0.1
    multiplier_hi: float = 10.0
    n_samples: int = 75

    def __post_init__(self):
        if not 0 < self.multiplier_lo < self.multiplier_hi:
            raise ValidationError(
                f"need 0 < lo < hi, got lo={self.multiplier_lo}, hi={self.multiplier_hi}"
            )
        if self.n_samples < 2:
            raise ValidationError(f"grid needs at least 2 samples, got {self.n_samples}")

    def sigmas(self, mean_distance: float) -> np.ndarray:
        return np.linspace(
            self.multiplier_lo * mean_distance,
            self.multiplier_hi * mean_distance,
            self.n_samples,
        )


@dataclass(frozen=True)
class WidthState:
    """Per-layer EMA state: sigma_t = beta * sigma_{t-1} + (1 - beta) * sigma*_t."""

    layer_id: int
    beta: float = 0.9
    current_sigma: float | None = None
    iteration: int = 0

    def __post_init__(self):
        if not 0 <= self.beta <= 1:
            raise ValidationError(f"beta must lie in [0, 1], got {self.beta}")
        if self.current_sigma is not None and not self.current_sigma > 0:
            raise ValidationError(f"current_sigma must be > 0, got {self.current_sigma}")


@dataclass(frozen=True)
class LabelKernelSpec:
    """Width of the RBF kernel applied to one-hot encoded labels.

    The default 0.1 makes off-class entries exp(-200), i.e. numerically the
    ideal block kernel, while keeping the matrix strictly positive.
    """

    sigma_y: float = 0.1

    def __post_init__(self):
        check_sigma(self.sigma_y)


def kernel_alignment(a, b) -> float:
    """Normalized Frobenius inner product <A, B>_F / (||A||_F ||B||_F).

    Lies in [0, 1] for entrywise-nonnegative kernels and reaches 1 exactly
    when one matrix is a positive multiple of the other.
    """
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.shape != bv.shape:
        raise SizeMismatch(f"shape mismatch: {av.shape} vs {bv.shape}")
    norm_a = np.linalg.norm(av)
    norm_b = np.linalg.norm(bv)
    if norm_a == 0 or norm_b == 0:
        raise ZeroNorm("kernel alignment is undefined for an all-zero matrix")
    return float(np.vdot(av, bv) / (norm_a * norm_b))


def mean_pairwise_distance(points) -> float:
    """Mean Euclidean distance over all i < j sample pairs."""
    x = as_sample_matrix(points)
    return float(pdist(x).mean())


def alignment_curve(activations, label_gram: GramMatrix, grid: WidthGrid):
    """Alignment of the activation RBF Gram with the label Gram at each grid width.

    Returns (sigmas, alignments); the squared-distance matrix is computed
    once and shared across the grid.
    """
    x = as_sample_matrix(activations)
    label_values = np.asarray(label_gram, dtype=np.float64)
    if label_values.shape[0] != x.shape[0]:
        raise SizeMismatch(
            f"label Gram is {label_values.shape[0]}x{label_values.shape[0]} "
            f"but batch has {x.shape[0]} samples"
        )
    d2 = squared_distances(x)
    mean_distance = float(np.sqrt(d2[np.triu_indices_from(d2, k=1)]).mean())
    if mean_distance == 0:
        raise DegenerateDistances("all activations are identical")
    sigmas = grid.sigmas(mean_distance)
    alignments = np.array(
        [
            kernel_alignment(gram_from_squared_distances(d2, s), label_values)
            for s in sigmas
        ]
    )
    return sigmas, alignments


def select_sigma(activations, label_gram: GramMatrix, grid: WidthGrid) -> float:
    """Grid width maximizing kernel alignment with the label Gram.

    Deterministic: ties break toward the smallest width.
    """
    sigmas, alignments = alignment_curve(activations, label_gram, grid)
    return float(sigmas[int(np.argmax(alignments))])


def ema_update(state: WidthState, sigma_star: float) -> WidthState:
    """Blend a newly selected width into the per-layer EMA state.

    The first update adopts sigma_star unchanged; later updates return
    beta * previous + (1 - beta) * sigma_star.
    """
    sigma_star = check_sigma(sigma_star)
    if state.current_sigma is None:
        blended = sigma_star
    else:
        blended = state.beta * state.current_sigma + (1.0 - state.beta) * sigma_star
    return replace(state, current_sigma=blended, iteration=state.iteration + 1)


def label_gram(labels, spec: LabelKernelSpec, num_classes: int) -> GramMatrix:
    """RBF Gram matrix over one-hot encoded class labels.

    Same-class pairs have distance 0 (entry 1); different-class one-hot
    vectors differ in exactly two coordinates, giving exp(-2 / sigma_y^2).
    """
    y = as_label_vector(labels, num_classes)
    if y.size < 2:
        raise TooFewSamples("need at least 2 labels")
    one_hot = np.zeros((y.size, num_classes), dtype=np.float64)
    one_hot[np.arange(y.size), y] = 1.0
    return rbf_gram(one_hot, spec.sigma_y)


def ideal_label_gram(labels, num_classes: int | None = None) -> GramMatrix:
    """Exact 0/1 block kernel: entry (i, j) is 1 iff labels match.

    Normalized per the usual trace-one construction, this matrix has one
    eigenvalue N_c / N per class and zeros elsewhere, so its entropy for
    balanced classes is exactly log2(num_classes).
    """
    y = np.asarray(labels).reshape(-1)
    if num_classes is not None:
        y = as_label_vector(y, num_classes)
    if y.size < 2:
        raise TooFewSamples("need at least 2 labels")
    return GramMatrix((y[:, None] == y[None, :]).astype(np.float64))
