"""Information-plane analysis of neural networks via matrix-based entropy.

Entropy and mutual information are estimated from the eigenvalue spectra
of trace-normalized tensor-kernel Gram matrices built on mini-batches of
layer activations; per-layer kernel widths come from a kernel-alignment
grid search stabilized by an exponential moving average. A toy MLP
trainer, a binary activation-dump format, and a CLI make the whole
pipeline runnable end to end.
"""

from .entropy import (
    DensityMatrix,
    GramMatrix,
    eigenvalues,
    joint_entropy,
    multivariate_joint_entropy,
    mutual_information,
    normalize_gram,
    rbf_gram,
    renyi_entropy,
    tensor_gram,
    von_neumann_entropy,
)
from .estimators import InformationPlaneEstimator, KernelWidthSelector
from .exceptions import InfoPlaneError
from .pipeline import (
    ActivationBatch,
    IPPoint,
    PipelineConfig,
    Trajectory,
    dpi_report,
    expected_label_entropy,
    process_iteration,
    smooth_trajectory,
)
from .width import (
    LabelKernelSpec,
    WidthGrid,
    WidthState,
    alignment_curve,
    ema_update,
    ideal_label_gram,
    kernel_alignment,
    label_gram,
    mean_pairwise_distance,
    select_sigma,
)

__version__ = "0.1.0"

__all__ = [
    "ActivationBatch",
    "DensityMatrix",
    "GramMatrix",
    "IPPoint",
    "InfoPlaneError",
    "InformationPlaneEstimator",
    "KernelWidthSelector",
    "LabelKernelSpec",
    "PipelineConfig",
    "Trajectory",
    "WidthGrid",
    "WidthState",
    "alignment_curve",
    "dpi_report",
    "eigenvalues",
    "ema_update",
    "expected_label_entropy",
    "ideal_label_gram",
    "joint_entropy",
    "kernel_alignment",
    "label_gram",
    "mean_pairwise_distance",
    "multivariate_joint_entropy",
    "mutual_information",
    "normalize_gram",
    "process_iteration",
    "rbf_gram",
    "renyi_entropy",
    "select_sigma",
    "smooth_trajectory",
    "tensor_gram",
    "von_neumann_entropy",
]
