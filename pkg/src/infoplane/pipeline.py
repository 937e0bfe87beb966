"""Per-iteration mutual-information estimation for layer activation streams.

For every captured training iteration, :func:`process_iteration` takes the
input batch, the labels, and one activation batch per layer, selects each
layer's kernel width by alignment, and produces one :class:`IPPoint` per
layer holding I(input; layer) and I(layer; labels) together with all the
entropy components those differences were built from. Points accumulate
into a :class:`Trajectory`, which can be smoothed with a trailing moving
average and summarized into a data-processing-inequality report.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .entropy import joint_entropy, normalize_gram, renyi_entropy, tensor_gram
from .exceptions import (
    BatchMismatch,
    DegenerateDistances,
    EmptyClass,
    TooFewLayers,
    TooFewSamples,
    ValidationError,
)
from .validation import as_label_vector, check_alpha, check_finite, check_sigma
from .width import LabelKernelSpec, WidthGrid, WidthState, ema_update, label_gram, select_sigma


@dataclass(frozen=True)
class ActivationBatch:
    """One mini-batch of one layer's output: values has shape (N, *sample_shape)."""

    layer_id: int
    iteration: int
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, order="C")  # copy before freezing
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        if v.ndim < 2:
            raise ValidationError("batch values must have shape (N, ...)")
        if v.shape[0] < 2:
            raise TooFewSamples(f"batch needs at least 2 samples, got {v.shape[0]}")
        check_finite(v, f"activations (layer {self.layer_id}, iteration {self.iteration})")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def sample_shape(self) -> tuple[int, ...]:
        return self.values.shape[1:]

    def flat(self) -> np.ndarray:
        return self.values.reshape(self.n, -1)


@dataclass(frozen=True)
class IPPoint:
    """One (iteration, layer) record of the information plane."""

    iteration: int
    layer_id: int
    mi_input: float  # I(input; layer) in bits
    mi_label: float  # I(layer; labels) in bits
    sigma: float  # EMA kernel width the layer Gram was built with
    s_t: float
    s_x: float
    s_y: float
    s_joint_xt: float
    s_joint_ty: float


@dataclass(frozen=True)
class Trajectory:
    """Ordered IP points for all layers, plus the smoothing window they carry.

    smoothing_k == 1 means raw, per-mini-batch values.
    """

    points: tuple[IPPoint, ...]
    smoothing_k: int = 1

    def __post_init__(self):
        pts = tuple(sorted(self.points, key=lambda p: (p.iteration, p.layer_id)))
        per_layer: dict[int, int] = {}
        for p in pts:
            last = per_layer.get(p.layer_id)
            if last is not None and p.iteration <= last:
                raise ValidationError(
                    f"iterations must be strictly increasing per layer "
                    f"(layer {p.layer_id} at iteration {p.iteration})"
                )
            per_layer[p.layer_id] = p.iteration
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    def layer_ids(self) -> list[int]:
        return sorted({p.layer_id for p in self.points})

    def layer_series(self, layer_id: int) -> list[IPPoint]:
        return [p for p in self.points if p.layer_id == layer_id]


@dataclass(frozen=True)
class PipelineConfig:
    """Estimation settings; the defaults reproduce the standard protocol."""

    alpha: float = 1.0
    input_sigma: float = 8.0
    label_sigma: float = 0.1
    beta: float = 0.9
    grid_lo: float = 0.1
    grid_hi: float = 10.0
    grid_samples_stage1: int = 75
    grid_samples_stage2: int = 50
    grid_switch_iteration: int = 500
    smoothing_k: int = 10

    def __post_init__(self):
        check_alpha(self.alpha)
        check_sigma(self.input_sigma)
        check_sigma(self.label_sigma)

    def grid_for(self, iteration: int) -> WidthGrid:
        n = (
            self.grid_samples_stage1
            if iteration < self.grid_switch_iteration
            else self.grid_samples_stage2
        )
        return WidthGrid(self.grid_lo, self.grid_hi, n)

    def label_spec(self) -> LabelKernelSpec:
        return LabelKernelSpec(self.label_sigma)


def process_iteration(
    input_batch: ActivationBatch,
    labels,
    num_classes: int,
    layer_batches,
    width_states: dict[int, WidthState],
    config: PipelineConfig,
) -> list[IPPoint]:
    """Estimate one IPPoint per layer for a single captured iteration.

    The input-side density matrix (fixed width) and the label-side density
    matrix are built once and shared by every layer. Per layer: select the
    alignment-optimal width on this batch, fold it into the layer's EMA
    state (width_states is updated in place; the states themselves are
    immutable), build the layer density matrix at the EMA width, and record
    both mutual informations with their entropy components.
    """
    layer_batches = sorted(layer_batches, key=lambda b: b.layer_id)
    if not layer_batches:
        raise ValidationError("need at least one layer batch")
    n = input_batch.n
    iteration = input_batch.iteration
    for b in layer_batches:
        if b.n != n:
            raise BatchMismatch(
                f"layer {b.layer_id} has {b.n} samples but input has {n}"
            )
        if b.iteration != iteration:
            raise BatchMismatch(
                f"layer {b.layer_id} is from iteration {b.iteration}, expected {iteration}"
            )
    y = as_label_vector(labels, num_classes)
    if y.size != n:
        raise BatchMismatch(f"got {y.size} labels for {n} samples")

    label_k = label_gram(y, config.label_spec(), num_classes)
    a_y = normalize_gram(label_k)
    a_x = tensor_gram(input_batch, config.input_sigma)
    s_x = renyi_entropy(a_x, config.alpha)
    s_y = renyi_entropy(a_y, config.alpha)
    grid = config.grid_for(iteration)

    points = []
    for batch in layer_batches:
        previous = width_states.get(batch.layer_id, WidthState(batch.layer_id, beta=config.beta))
        try:
            sigma_star = select_sigma(batch.flat(), label_k, grid)
        except DegenerateDistances:
            # A constant layer has an all-ones Gram at every width, so the
            # estimate is width-independent; keep the EMA where it was.
            sigma_star = previous.current_sigma if previous.current_sigma else 1.0
        state = ema_update(previous, sigma_star)
        width_states[batch.layer_id] = state
        a_t = tensor_gram(batch, state.current_sigma)
        s_t = renyi_entropy(a_t, config.alpha)
        s_joint_xt = joint_entropy(a_x, a_t, config.alpha)
        s_joint_ty = joint_entropy(a_t, a_y, config.alpha)
        points.append(
            IPPoint(
                iteration=iteration,
                layer_id=batch.layer_id,
                mi_input=s_x + s_t - s_joint_xt,
                mi_label=s_t + s_y - s_joint_ty,
                sigma=state.current_sigma,
                s_t=s_t,
                s_x=s_x,
                s_y=s_y,
                s_joint_xt=s_joint_xt,
                s_joint_ty=s_joint_ty,
            )
        )
    return points


_SMOOTHED_FIELDS = ("mi_input", "mi_label", "s_t", "s_x", "s_y", "s_joint_xt", "s_joint_ty")


def smooth_trajectory(traj: Trajectory, k: int) -> Trajectory:
    """Trailing moving average over up to k points per layer.

    Leading points average over however many points exist so far, so the
    smoothed series has the same length as the raw one. All entropy
    components are averaged with the same window as the MI values, which
    keeps mi = marginals - joint true point by point; the recorded sigma is
    left untouched.
    """
    k = int(k)
    if k < 1:
        raise ValidationError(f"smoothing window must be >= 1, got {k}")
    if k == 1:
        return traj
    smoothed = []
    for layer_id in traj.layer_ids():
        series = traj.layer_series(layer_id)
        for i, point in enumerate(series):
            window = series[max(0, i - k + 1) : i + 1]
            means = {
                name: sum(getattr(p, name) for p in window) / len(window)
                for name in _SMOOTHED_FIELDS
            }
            smoothed.append(replace(point, **means))
    return Trajectory(tuple(smoothed), smoothing_k=k)


def dpi_report(traj: Trajectory) -> list[tuple[tuple[int, int], float]]:
    """Mean I(input; layer_l) - I(input; layer_l+1) for each adjacent layer pair.

    Nonnegative values indicate compliance with the data processing
    inequality along the layer chain.
    """
    layer_ids = traj.layer_ids()
    if len(layer_ids) < 2:
        raise TooFewLayers(f"need at least 2 layers, got {len(layer_ids)}")
    series = {lid: traj.layer_series(lid) for lid in layer_ids}
    report = []
    for first, second in zip(layer_ids, layer_ids[1:]):
        a = {p.iteration: p.mi_input for p in series[first]}
        b = {p.iteration: p.mi_input for p in series[second]}
        shared = sorted(set(a) & set(b))
        if not shared:
            raise ValidationError(
                f"layers {first} and {second} share no iterations"
            )
        diffs = [a[it] - b[it] for it in shared]
        report.append(((first, second), float(np.mean(diffs))))
    return report


def expected_label_entropy(class_counts) -> float:
    """Entropy in bits of the ideal label kernel with the given class sizes.

    Equals -sum_k (N_k / N) log2(N_k / N), i.e. log2(K) for balanced
    classes; this is the ceiling I(layer; labels) stabilizes at once a
    classifier is essentially exact.
    """
    counts = np.asarray(class_counts, dtype=np.float64).reshape(-1)
    if counts.size < 1:
        raise EmptyClass("need at least one class")
    if np.any(counts <= 0):
        raise EmptyClass("every class count must be positive")
    p = counts / counts.sum()
    return float(-np.sum(p * np.log2(p)))
