"""Self-contained data generator and MLP trainer for end-to-end runs.

Gaussian class blobs stand in for a real dataset, and a small numpy MLP
trained with mini-batch SGD and cross-entropy provides the activation
stream: every ``capture_every`` iterations the trainer emits the input
batch, the labels, and the post-activation output of every hidden layer
plus the softmax layer as :class:`~infoplane.pipeline.ActivationBatch`
objects. Everything is seeded and single-threaded, so runs are bit-for-bit
reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DivergedTraining, InvalidSpec, ValidationError
from .pipeline import ActivationBatch


@dataclass(frozen=True)
class SyntheticDataset:
    """Balanced Gaussian blobs: one isotropic cluster per class."""

    num_classes: int = 10
    dim: int = 16
    n_train: int = 2000
    separation: float = 5.0
    noise: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise InvalidSpec(f"need at least 2 classes, got {self.num_classes}")
        if self.dim < 2:
            raise InvalidSpec(f"need at least 2 dimensions, got {self.dim}")
        if self.noise < 0:
            raise InvalidSpec(f"noise must be >= 0, got {self.noise}")
        if self.n_train < self.num_classes or self.n_train % self.num_classes:
            raise InvalidSpec(
                f"n_train={self.n_train} is not a positive multiple of "
                f"num_classes={self.num_classes}"
            )

    def class_means(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return rng.normal(scale=self.separation, size=(self.num_classes, self.dim))


def generate_dataset(spec: SyntheticDataset):
    """Sample the blobs: returns (inputs (N, D), labels (N,)), shuffled, seeded."""
    means = spec.class_means()
    rng = np.random.default_rng(spec.seed + 1)
    per_class = spec.n_train // spec.num_classes
    labels = np.repeat(np.arange(spec.num_classes), per_class)
    inputs = means[labels] + rng.normal(scale=spec.noise, size=(spec.n_train, spec.dim))
    order = rng.permutation(spec.n_train)
    return inputs[order], labels[order]


def _softmax(z):
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


class ToyMLP:
    """Fully connected classifier trained with plain SGD.

    layer_sizes runs input -> hidden widths -> class count; hidden layers
    use relu or tanh and the output is a softmax. Weights are seeded
    uniform, scaled by fan-in for relu and by fan-average for tanh; biases
    start at zero.
    """

    def __init__(self, layer_sizes, activation: str = "relu", seed: int = 0):
        layer_sizes = tuple(int(s) for s in layer_sizes)
        if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
            raise InvalidSpec(f"bad layer sizes {layer_sizes}")
        if activation not in ("relu", "tanh"):
            raise InvalidSpec(f"activation must be relu or tanh, got {activation!r}")
        self.layer_sizes = layer_sizes
        self.activation = activation
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:]):
            if activation == "relu":
                limit = math.sqrt(6.0 / fan_in)
            else:
                limit = math.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def n_hidden(self) -> int:
        return len(self.weights) - 1

    def forward(self, x):
        """Post-activation values of each hidden layer plus the softmax output."""
        x = np.asarray(x, dtype=np.float64)
        hidden = []
        a = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            z = a @ w + b
            a = np.maximum(z, 0.0) if self.activation == "relu" else np.tanh(z)
            hidden.append(a)
        probs = _softmax(a @ self.weights[-1] + self.biases[-1])
        return hidden, probs

    def predict(self, x):
        _, probs = self.forward(x)
        return probs.argmax(axis=1)

    def loss(self, x, y) -> float:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        a = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            z = a @ w + b
            a = np.maximum(z, 0.0) if self.activation == "relu" else np.tanh(z)
        logits = a @ self.weights[-1] + self.biases[-1]
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1))
        return float(np.mean(log_norm - shifted[np.arange(len(y)), y]))

    def loss_and_gradients(self, x, y):
        """Cross-entropy loss and its analytic gradients for one batch."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n = x.shape[0]

        pre = []
        post = [x]
        a = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            z = a @ w + b
            a = np.maximum(z, 0.0) if self.activation == "relu" else np.tanh(z)
            pre.append(z)
            post.append(a)
        logits = a @ self.weights[-1] + self.biases[-1]
        probs = _softmax(logits)

        shifted = logits - logits.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1))
        loss = float(np.mean(log_norm - shifted[np.arange(n), y]))

        delta = probs.copy()
        delta[np.arange(n), y] -= 1.0
        delta /= n

        grad_w = [None] * len(self.weights)
        grad_b = [None] * len(self.biases)
        for layer in range(len(self.weights) - 1, -1, -1):
            grad_w[layer] = post[layer].T @ delta
            grad_b[layer] = delta.sum(axis=0)
            if layer > 0:
                upstream = delta @ self.weights[layer].T
                if self.activation == "relu":
                    delta = upstream * (pre[layer - 1] > 0)
                else:
                    delta = upstream * (1.0 - post[layer] ** 2)
        return loss, grad_w, grad_b

    def apply_gradients(self, grad_w, grad_b, lr: float) -> None:
        for w, g in zip(self.weights, grad_w):
            w -= lr * g
        for b, g in zip(self.biases, grad_b):
            b -= lr * g


def finite_difference_gradients(model: ToyMLP, x, y, step: float = 1e-5):
    """Central-difference gradients of the loss, the oracle for backprop."""
    grad_w = []
    grad_b = []
    for params, grads in ((model.weights, grad_w), (model.biases, grad_b)):
        for array in params:
            grad = np.zeros_like(array)
            flat = array.reshape(-1)
            for i in range(flat.size):
                original = flat[i]
                flat[i] = original + step
                upper = model.loss(x, y)
                flat[i] = original - step
                lower = model.loss(x, y)
                flat[i] = original
                grad.reshape(-1)[i] = (upper - lower) / (2 * step)
            grads.append(grad)
    return grad_w, grad_b


def accuracy(model: ToyMLP, x, y) -> float:
    return float(np.mean(model.predict(x) == np.asarray(y)))


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.09
    batch_size: int = 100
    epochs: int = 10
    capture_every: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.lr < 0 or self.batch_size < 2 or self.epochs < 0 or self.capture_every < 1:
            raise ValidationError(f"bad training config: {self}")


@dataclass(frozen=True)
class TrainStep:
    """One SGD step; captured batches are present every capture_every iterations.

    Captured activations come from the forward pass of the step itself,
    i.e. they reflect the weights before the update. Hidden layers carry
    ids 1..H and the softmax output id H+1; the input batch has id 0.
    """

    iteration: int
    epoch: int
    loss: float
    batch_accuracy: float
    input_batch: ActivationBatch | None = None
    labels: np.ndarray | None = None
    layer_batches: tuple[ActivationBatch, ...] | None = None


def train_epochs(model: ToyMLP, inputs, labels, config: TrainConfig):
    """Mini-batch SGD generator yielding one TrainStep per iteration."""
    inputs = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if inputs.shape[0] != labels.shape[0]:
        raise ValidationError("inputs and labels disagree on sample count")
    rng = np.random.default_rng(config.seed)
    n = inputs.shape[0]
    iteration = 0
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n - config.batch_size + 1, config.batch_size):
            idx = order[start : start + config.batch_size]
            batch_x = inputs[idx]
            batch_y = labels[idx]
            loss, grad_w, grad_b = model.loss_and_gradients(batch_x, batch_y)
            if not math.isfinite(loss):
                raise DivergedTraining(f"loss became {loss} at iteration {iteration}")
            hidden, probs = model.forward(batch_x)

            step = TrainStep(
                iteration=iteration,
                epoch=epoch,
                loss=loss,
                batch_accuracy=float(np.mean(probs.argmax(axis=1) == batch_y)),
            )
            if iteration % config.capture_every == 0:
                layer_batches = tuple(
                    ActivationBatch(layer_id=i + 1, iteration=iteration, values=a)
                    for i, a in enumerate([*hidden, probs])
                )
                step = TrainStep(
                    iteration=step.iteration,
                    epoch=step.epoch,
                    loss=step.loss,
                    batch_accuracy=step.batch_accuracy,
                    input_batch=ActivationBatch(
                        layer_id=0, iteration=iteration, values=batch_x
                    ),
                    labels=batch_y,
                    layer_batches=layer_batches,
                )
            model.apply_gradients(grad_w, grad_b, config.lr)
            yield step
            iteration += 1
