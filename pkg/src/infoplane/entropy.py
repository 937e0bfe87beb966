"""Matrix-based Renyi entropy and mutual information over kernel Gram matrices.

The estimator works on the eigenvalue spectrum of a trace-one normalized
kernel matrix, so no density estimation is involved: build a Gram matrix
with :func:`rbf_gram`, normalize it with :func:`normalize_gram`, and feed
the resulting density matrix to the entropy functionals. Multi-channel
feature tensors go through :func:`tensor_gram`, which flattens each sample
and applies the RBF kernel under the Euclidean norm; this is numerically
stable where the per-channel Hadamard route
(:func:`multivariate_joint_entropy`) collapses as the channel count grows.

All functions are pure and all values immutable, so independent estimates
can safely run in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .exceptions import (
    DegenerateTrace,
    NegativeEigenvalue,
    SizeMismatch,
    SpectrumFailure,
    ValidationError,
    ZeroDiagonal,
)
from .validation import as_sample_matrix, check_alpha, check_sigma

# Eigenvalues in [-EIGENVALUE_TOLERANCE, 0) are treated as exact zeros; anything
# lower means the input was not PSD and is reported instead of silently fixed.
EIGENVALUE_TOLERANCE = 1e-8

# Hadamard-product traces below this are numerically meaningless (just above
# the double-precision underflow threshold).
TRACE_UNDERFLOW = 1e-300


def _frozen(values: np.ndarray) -> np.ndarray:
    # Always copy: freezing an aliased input would flip the caller's
    # writeable flag behind their back.
    out = np.array(values, dtype=np.float64, order="C")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GramMatrix:
    """Raw N x N symmetric kernel matrix K with K_ij = kappa(x_i, x_j)."""

    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValidationError(f"Gram matrix must be square, got {v.shape}")
        if not np.array_equal(v, v.T):
            raise ValidationError("Gram matrix must be exactly symmetric")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


@dataclass(frozen=True)
class DensityMatrix:
    """Trace-one normalized kernel matrix; the spectral object entropy is computed from."""

    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValidationError(f"density matrix must be square, got {v.shape}")
        if not np.array_equal(v, v.T):
            raise ValidationError("density matrix must be exactly symmetric")
        trace = float(np.trace(v))
        if abs(trace - 1.0) > 1e-12:
            raise ValidationError(f"density matrix trace must be 1, got {trace!r}")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def _values(matrix) -> np.ndarray:
    return matrix.values if hasattr(matrix, "values") else np.asarray(matrix, dtype=np.float64)


def squared_distances(points) -> np.ndarray:
    """Pairwise squared Euclidean distances, exactly symmetric with a zero diagonal."""
    x = as_sample_matrix(points)
    return squareform(pdist(x, "sqeuclidean"))


def rbf_gram(points, sigma: float) -> GramMatrix:
    """Gram matrix of the Gaussian kernel exp(-||x_i - x_j||^2 / sigma^2).

    Each pair is evaluated once, so the result is symmetric with a unit
    diagonal by construction and all entries lie in [0, 1].
    """
    sigma = check_sigma(sigma)
    d2 = squared_distances(points)
    return GramMatrix(np.exp(-d2 / (sigma * sigma)))


def gram_from_squared_distances(d2: np.ndarray, sigma: float) -> GramMatrix:
    """RBF Gram matrix from a precomputed squared-distance matrix.

    Lets width-grid searches reuse one O(N^2 D) distance pass across many
    sigma candidates.
    """
    sigma = check_sigma(sigma)
    return GramMatrix(np.exp(-d2 / (sigma * sigma)))


def normalize_gram(gram: GramMatrix | np.ndarray) -> DensityMatrix:
    """Normalize K to A with A_ij = K_ij / (N * sqrt(K_ii * K_jj)).

    The result has unit trace; it is PSD whenever the input is.
    """
    k = _values(gram)
    diag = np.diag(k)
    if np.any(diag <= 0):
        raise ZeroDiagonal("all Gram diagonal entries must be > 0")
    root = np.sqrt(diag)
    a = k / np.outer(root, root) / k.shape[0]
    a = (a + a.T) / 2  # restore exact symmetry lost to the outer-product division
    return DensityMatrix(a)


def eigenvalues(density: DensityMatrix) -> np.ndarray:
    """Spectrum of a density matrix, sorted descending and clamped at zero.

    Values in [-1e-8, 0) are rounded up to 0 (RBF Grams are PSD in exact
    arithmetic); anything below -1e-8 raises NegativeEigenvalue. Positive
    values below the solver's noise floor (n * eps * lambda_max, the usual
    rank tolerance) are zeroed as well, since fractional powers at
    alpha < 1 would otherwise amplify pure rounding noise.
    """
    m = density.values
    try:
        vals = np.linalg.eigvalsh((m + m.T) / 2)
    except np.linalg.LinAlgError as exc:
        raise SpectrumFailure(f"eigensolver did not converge: {exc}") from exc
    lowest = float(vals[0])
    if lowest < -EIGENVALUE_TOLERANCE:
        raise NegativeEigenvalue(
            f"eigenvalue {lowest} below -{EIGENVALUE_TOLERANCE}; matrix is not PSD"
        )
    vals = np.clip(vals[::-1], 0.0, None)
    floor = vals.shape[0] * np.finfo(np.float64).eps * vals[0]
    vals[vals < floor] = 0.0
    return vals


def renyi_entropy(density: DensityMatrix, alpha: float) -> float:
    """Renyi entropy of order alpha in bits: log2(sum_i lambda_i^alpha) / (1 - alpha).

    alpha = 1 is accepted and dispatches to the von Neumann limit.
    """
    alpha = check_alpha(alpha)
    if alpha == 1.0:
        return von_neumann_entropy(density)
    lam = eigenvalues(density)
    return float(np.log2(np.sum(lam**alpha)) / (1.0 - alpha))


def von_neumann_entropy(density: DensityMatrix) -> float:
    """Entropy in bits at the alpha -> 1 limit: -sum_i lambda_i log2(lambda_i).

    Zero eigenvalues contribute nothing (0 log 0 = 0), so rank-deficient
    density matrices such as ideal label kernels are handled exactly.
    """
    lam = eigenvalues(density)
    pos = lam[lam > 0]
    return float(-np.sum(pos * np.log2(pos)))


def _hadamard_density(matrices) -> DensityMatrix:
    product = np.copy(matrices[0])
    for m in matrices[1:]:
        product *= m
    trace = float(np.trace(product))
    if trace < TRACE_UNDERFLOW:
        raise DegenerateTrace(
            f"Hadamard-product trace {trace!r} underflowed; "
            f"use the tensor route for many channels"
        )
    return DensityMatrix(product / trace)


def joint_entropy(a: DensityMatrix, b: DensityMatrix, alpha: float) -> float:
    """Joint entropy S_alpha((A o B) / tr(A o B)) of two same-batch density matrices."""
    if a.n != b.n:
        raise SizeMismatch(f"sample counts differ: {a.n} vs {b.n}")
    return renyi_entropy(_hadamard_density([a.values, b.values]), alpha)


def mutual_information(a: DensityMatrix, b: DensityMatrix, alpha: float) -> float:
    """Mutual information in bits: S(A) + S(B) - S(A, B)."""
    return (
        renyi_entropy(a, alpha)
        + renyi_entropy(b, alpha)
        - joint_entropy(a, b, alpha)
    )


def multivariate_joint_entropy(densities, alpha: float) -> float:
    """Joint entropy across C channel density matrices via a C-fold Hadamard product.

    Every factor entry lies in (0, 1/N], so the product decays geometrically
    with C; once the trace drops below 1e-300 this raises DegenerateTrace.
    That collapse is intended behavior documenting the limits of the
    per-channel route. :func:`tensor_gram` gives the identical result for
    equal channel widths without the underflow.
    """
    densities = list(densities)
    if not densities:
        raise ValidationError("need at least one density matrix")
    n = densities[0].n
    for d in densities[1:]:
        if d.n != n:
            raise SizeMismatch("all density matrices must share the sample count")
    if len(densities) == 1:
        return renyi_entropy(densities[0], alpha)
    return renyi_entropy(_hadamard_density([d.values for d in densities]), alpha)


def tensor_gram(batch, sigma: float) -> DensityMatrix:
    """Density matrix of a batch of feature tensors under one RBF width.

    Each sample's tensor (any shape: C x H x W, flat D, ...) is flattened so
    the Frobenius norm becomes a Euclidean norm, then the Gram matrix is
    built and normalized. Because the RBF diagonal is 1, the entries are
    exactly kappa(x_i, x_j) / N.
    """
    values = _values(batch)
    flat = values.reshape(values.shape[0], -1)
    return normalize_gram(rbf_gram(flat, sigma))
