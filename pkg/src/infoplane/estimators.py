"""Scikit-learn style wrappers around the functional core.

These exist so the width selection and the trajectory assembly compose
with the wider ecosystem: parameters live in ``__init__`` and travel
through ``get_params``/``set_params``/``clone``, batch updates are
``partial_fit``-shaped, and fitted state uses trailing-underscore names.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .pipeline import ActivationBatch, PipelineConfig, Trajectory, dpi_report, process_iteration, smooth_trajectory
from .validation import as_label_vector, as_sample_matrix
from .width import (
    WidthGrid,
    WidthState,
    alignment_curve,
    ema_update,
    ideal_label_gram,
    label_gram,
    LabelKernelSpec,
)
from .entropy import gram_from_squared_distances, squared_distances


def _infer_classes(y, num_classes):
    y = np.asarray(y).reshape(-1)
    return int(num_classes) if num_classes is not None else int(y.max()) + 1


class KernelWidthSelector(BaseEstimator, TransformerMixin):
    """Select an RBF kernel width by alignment with the label kernel.

    Each ``fit``/``partial_fit`` call scores a linear grid of widths
    (multiples of the batch's mean pairwise distance) against the label
    Gram matrix and folds the argmax into an exponential moving average,
    so feeding successive mini-batches reproduces the per-layer width
    schedule of the full pipeline.

    Parameters
    ----------
    multiplier_lo, multiplier_hi : float
        Grid range as multiples of the mean pairwise distance.
    n_samples : int
        Number of equally spaced grid candidates.
    label_sigma : float or None
        Width of the RBF over one-hot labels; None uses the exact 0/1
        block kernel instead.
    beta : float
        EMA coefficient; 0 tracks the latest argmax, values near 1 are
        sluggish.
    num_classes : int or None
        Number of classes; inferred from ``y`` when None.

    Attributes
    ----------
    sigma_ : float
        EMA-stabilized width.
    sigma_star_ : float
        Argmax width of the most recent batch.
    alignment_ : float
        Alignment achieved by ``sigma_star_`` on the most recent batch.
    n_batches_ : int
        Number of batches folded in.
    """

    def __init__(
        self,
        multiplier_lo: float = 0.1,
        multiplier_hi: float = 10.0,
        n_samples: int = 75,
        label_sigma: float | None = 0.1,
        beta: float = 0.9,
        num_classes: int | None = None,
    ):
        self.multiplier_lo = multiplier_lo
        self.multiplier_hi = multiplier_hi
        self.n_samples = n_samples
        self.label_sigma = label_sigma
        self.beta = beta
        self.num_classes = num_classes

    def fit(self, X, y):
        """Reset the EMA state and fold in one batch."""
        for attr in ("sigma_", "sigma_star_", "alignment_", "n_batches_", "_state"):
            if hasattr(self, attr):
                delattr(self, attr)
        return self.partial_fit(X, y)

    def partial_fit(self, X, y):
        X = as_sample_matrix(X)
        k = _infer_classes(y, self.num_classes)
        y = as_label_vector(y, k)
        if self.label_sigma is None:
            gram_y = ideal_label_gram(y, k)
        else:
            gram_y = label_gram(y, LabelKernelSpec(self.label_sigma), k)
        grid = WidthGrid(self.multiplier_lo, self.multiplier_hi, self.n_samples)
        sigmas, alignments = alignment_curve(X, gram_y, grid)
        best = int(np.argmax(alignments))
        state = getattr(self, "_state", WidthState(layer_id=0, beta=self.beta))
        state = ema_update(state, float(sigmas[best]))
        self._state = state
        self.sigma_star_ = float(sigmas[best])
        self.alignment_ = float(alignments[best])
        self.sigma_ = float(state.current_sigma)
        self.n_batches_ = state.iteration
        return self

    def transform(self, X):
        """RBF Gram matrix of X at the selected width."""
        if not hasattr(self, "sigma_"):
            raise NotFittedError("call fit or partial_fit before transform")
        X = as_sample_matrix(X)
        return gram_from_squared_distances(squared_distances(X), self.sigma_).values


class InformationPlaneEstimator(BaseEstimator):
    """Accumulate information-plane trajectories from activation streams.

    Call :meth:`partial_fit` once per captured training iteration with the
    input batch, the labels, and the per-layer activations; the raw
    trajectory builds up in ``trajectory_``. Configuration mirrors
    :class:`~infoplane.pipeline.PipelineConfig`.
    """

    def __init__(
        self,
        alpha: float = 1.0,
        input_sigma: float = 8.0,
        label_sigma: float = 0.1,
        beta: float = 0.9,
        grid_lo: float = 0.1,
        grid_hi: float = 10.0,
        grid_samples_stage1: int = 75,
        grid_samples_stage2: int = 50,
        grid_switch_iteration: int = 500,
        smoothing_k: int = 10,
        num_classes: int | None = None,
    ):
        self.alpha = alpha
        self.input_sigma = input_sigma
        self.label_sigma = label_sigma
        self.beta = beta
        self.grid_lo = grid_lo
        self.grid_hi = grid_hi
        self.grid_samples_stage1 = grid_samples_stage1
        self.grid_samples_stage2 = grid_samples_stage2
        self.grid_switch_iteration = grid_switch_iteration
        self.smoothing_k = smoothing_k
        self.num_classes = num_classes

    def _config(self) -> PipelineConfig:
        return PipelineConfig(
            alpha=self.alpha,
            input_sigma=self.input_sigma,
            label_sigma=self.label_sigma,
            beta=self.beta,
            grid_lo=self.grid_lo,
            grid_hi=self.grid_hi,
            grid_samples_stage1=self.grid_samples_stage1,
            grid_samples_stage2=self.grid_samples_stage2,
            grid_switch_iteration=self.grid_switch_iteration,
            smoothing_k=self.smoothing_k,
        )

    def fit(self, iterations, y=None):
        """Consume an iterable of (X, y, layers) triples as one run."""
        for attr in ("_points", "_states", "num_classes_", "_next_iteration"):
            if hasattr(self, attr):
                delattr(self, attr)
        for record in iterations:
            self.partial_fit(*record)
        return self

    def partial_fit(self, X, y, layers, iteration: int | None = None):
        """Fold in one captured iteration.

        layers may be a dict {layer_id: (N, ...) array} or a sequence in
        chain order (ids then run 1..L). The iteration stamp defaults to a
        running counter.
        """
        if not hasattr(self, "_points"):
            self._points: list = []
            self._states: dict[int, WidthState] = {}
            self._next_iteration = 0
            self.num_classes_ = _infer_classes(y, self.num_classes)
        if iteration is None:
            iteration = self._next_iteration
        if isinstance(layers, dict):
            layer_items = sorted(layers.items())
        elif isinstance(layers, ActivationBatch):
            layer_items = [(layers.layer_id, layers.values)]
        else:
            layer_items = [
                (b.layer_id, b.values) if isinstance(b, ActivationBatch) else (i + 1, b)
                for i, b in enumerate(layers)
            ]
        input_values = X.values if isinstance(X, ActivationBatch) else X
        input_batch = ActivationBatch(layer_id=0, iteration=iteration, values=input_values)
        layer_batches = [
            ActivationBatch(layer_id=lid, iteration=iteration, values=values)
            for lid, values in layer_items
        ]
        points = process_iteration(
            input_batch, y, self.num_classes_, layer_batches, self._states, self._config()
        )
        self._points.extend(points)
        self._next_iteration = iteration + 1
        return self

    @property
    def trajectory_(self) -> Trajectory:
        if not hasattr(self, "_points"):
            raise NotFittedError("no iterations processed yet")
        return Trajectory(tuple(self._points))

    def smoothed_trajectory(self, k: int | None = None) -> Trajectory:
        return smooth_trajectory(self.trajectory_, self.smoothing_k if k is None else k)

    def dpi_report(self, smoothed: bool = True):
        traj = self.smoothed_trajectory() if smoothed else self.trajectory_
        return dpi_report(traj)

    def width_states(self) -> dict[int, WidthState]:
        """Per-layer EMA states after the iterations seen so far."""
        return dict(getattr(self, "_states", {}))
