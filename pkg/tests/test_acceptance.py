"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as the
criteria execute. Criteria 5-7 share one end-to-end training run.
"""

import math
import time

import numpy as np
import pytest
from click.testing import CliRunner

from infoplane.cli import main as cli_main
from infoplane.dataio import read_trajectory, write_dump, read_dump
from infoplane.entropy import (
    multivariate_joint_entropy,
    mutual_information,
    normalize_gram,
    rbf_gram,
    renyi_entropy,
    tensor_gram,
    von_neumann_entropy,
    DensityMatrix,
)
from infoplane.exceptions import DegenerateTrace
from infoplane.harness import ToyMLP, finite_difference_gradients
from infoplane.pipeline import ActivationBatch, dpi_report
from infoplane.width import LabelKernelSpec, ideal_label_gram, label_gram

LOG2_10 = math.log2(10)


def check(num, name, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"[criterion {num:02d}] {name}: {status} ({detail})")
    assert ok, f"criterion {num} ({name}): {detail}"


def random_density(rng):
    n = int(rng.integers(8, 65))
    dim = int(rng.integers(1, 8))
    sigma = float(rng.uniform(0.5, 3.0))
    return normalize_gram(rbf_gram(rng.normal(size=(n, dim)), sigma))


@pytest.fixture(scope="module")
def demo_run(tmp_path_factory):
    """One full-protocol train-demo run, shared by criteria 5, 6 and 7."""
    out = tmp_path_factory.mktemp("acceptance_demo")
    started = time.perf_counter()
    result = CliRunner().invoke(cli_main, ["train-demo", "--out", str(out), "--seed", "0"])
    elapsed = time.perf_counter() - started
    assert result.exit_code == 0, result.output + repr(result.exception)
    accuracy = None
    for line in result.output.splitlines():
        if "final train accuracy" in line:
            accuracy = float(line.rsplit(" ", 1)[-1])
    return out, accuracy, elapsed


def test_criterion_01_alpha_limit():
    started = time.perf_counter()
    rng = np.random.default_rng(101)
    epsilons = (1e-3, 1e-4, 1e-5)
    worst_at_1e4 = 0.0
    mean_errors = np.zeros(3)
    monotone = True
    for _ in range(100):
        density = random_density(rng)
        vn = von_neumann_entropy(density)
        errors = [
            max(
                abs(renyi_entropy(density, 1 + eps) - vn),
                abs(renyi_entropy(density, 1 - eps) - vn),
            )
            for eps in epsilons
        ]
        worst_at_1e4 = max(worst_at_1e4, errors[1])
        monotone &= errors[0] + 1e-10 >= errors[1] >= errors[2] - 1e-10
        mean_errors += errors
    mean_errors /= 100
    elapsed = time.perf_counter() - started
    ok = (
        worst_at_1e4 <= 1e-3
        and monotone
        and mean_errors[0] > mean_errors[1] > mean_errors[2]
        and elapsed < 10
    )
    check(
        1,
        "entropy at alpha 1+-1e-4 matches the von Neumann limit",
        ok,
        f"max err {worst_at_1e4:.2e} bits <= 1e-3; mean errs "
        f"{mean_errors[0]:.2e} > {mean_errors[1]:.2e} > {mean_errors[2]:.2e}; "
        f"{elapsed:.1f}s < 10s",
    )


def test_criterion_02_tensor_multivariate_equivalence():
    started = time.perf_counter()
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(8, 65))
        channels = int(rng.integers(1, 9))
        hw = int(rng.integers(2, 11))
        sigma = float(rng.uniform(1.0, 4.0))
        batch = rng.normal(size=(n, channels, hw))
        per_channel = [
            normalize_gram(rbf_gram(batch[:, c, :], sigma)) for c in range(channels)
        ]
        tensor = tensor_gram(batch, sigma)
        for alpha in (1.0, 2.0):
            gap = abs(
                renyi_entropy(tensor, alpha)
                - multivariate_joint_entropy(per_channel, alpha)
            )
            worst = max(worst, gap)
    elapsed = time.perf_counter() - started
    ok = worst <= 1e-10 and elapsed < 10
    check(
        2,
        "tensor route equals the multivariate route at equal widths",
        ok,
        f"max |gap| {worst:.2e} bits <= 1e-10 over 50 instances; {elapsed:.1f}s < 10s",
    )


def test_criterion_03_multivariate_collapse_tensor_stability():
    started = time.perf_counter()
    rng = np.random.default_rng(303)
    batch = rng.normal(size=(64, 512, 4))
    sigma = 8.0
    tensor_value = renyi_entropy(tensor_gram(batch, sigma), 1.0)
    tensor_ok = 0.0 <= tensor_value <= math.log2(64)

    channels = [normalize_gram(rbf_gram(batch[:, c, :], sigma)) for c in range(512)]
    try:
        multivariate = multivariate_joint_entropy(channels, 1.0)
        collapse = abs(multivariate - tensor_value) > 0.1
        outcome = f"multivariate deviates by {abs(multivariate - tensor_value):.3f} bits"
    except DegenerateTrace:
        collapse = True
        outcome = "multivariate raised DegenerateTrace"
    elapsed = time.perf_counter() - started
    ok = tensor_ok and collapse and elapsed < 30
    check(
        3,
        "512-channel Hadamard route collapses while the tensor route stays finite",
        ok,
        f"{outcome}; tensor value {tensor_value:.4f} in [0, 6]; {elapsed:.1f}s < 30s",
    )


def test_criterion_04_label_entropy():
    started = time.perf_counter()
    labels = np.repeat(np.arange(10), 10)
    ideal = von_neumann_entropy(normalize_gram(ideal_label_gram(labels)))
    rbf = von_neumann_entropy(
        normalize_gram(label_gram(labels, LabelKernelSpec(0.1), 10))
    )
    elapsed = time.perf_counter() - started
    ok = abs(ideal - LOG2_10) <= 1e-6 and abs(rbf - LOG2_10) <= 1e-4 and elapsed < 1
    check(
        4,
        "balanced 10-class label kernel carries log2(10) bits",
        ok,
        f"ideal err {abs(ideal - LOG2_10):.2e} <= 1e-6, "
        f"rbf err {abs(rbf - LOG2_10):.2e} <= 1e-4; {elapsed:.2f}s < 1s",
    )


def test_criterion_05_end_to_end_log2k(demo_run):
    out, accuracy, elapsed = demo_run
    traj = read_trajectory(out / "trajectory_smoothed.csv")
    final_layer = max(traj.layer_ids())
    final_mi = traj.layer_series(final_layer)[-1].mi_label
    gap = abs(final_mi - LOG2_10)
    ok = accuracy is not None and accuracy >= 0.99 and gap <= 0.1 and elapsed < 300
    check(
        5,
        "trained demo saturates final-layer I(T;Y) at log2(10)",
        ok,
        f"train accuracy {accuracy}, |I(T;Y) - log2(10)| = {gap:.4f} <= 0.1; "
        f"run took {elapsed:.0f}s < 300s",
    )


def test_criterion_06_fitting_phase(demo_run):
    out, _, _ = demo_run
    traj = read_trajectory(out / "trajectory_smoothed.csv")
    final_layer = max(traj.layer_ids())
    series = [p.mi_label for p in traj.layer_series(final_layer)]
    half = series[: len(series) // 2]
    steps = len(half) - 1
    violations = sum(1 for a, b in zip(half, half[1:]) if b - a < -0.05)
    ok = steps > 0 and violations <= 0.05 * steps
    check(
        6,
        "final-layer I(T;Y) is non-decreasing through the first half of training",
        ok,
        f"{violations} drops > 0.05 bits in {steps} steps "
        f"({violations / steps:.1%} <= 5%)",
    )


def test_criterion_07_dpi_compliance(demo_run):
    out, _, _ = demo_run
    traj = read_trajectory(out / "trajectory_smoothed.csv")
    layers = traj.layer_ids()
    report = dpi_report(traj)
    compliant = sum(1 for _, diff in report if diff >= -1e-3)
    ok = len(layers) >= 4 and compliant >= len(layers) - 2
    check(
        7,
        "layer chain respects the data processing inequality",
        ok,
        f"{compliant} of {len(report)} adjacent pairs >= -1e-3 bits "
        f"(need >= {len(layers) - 2}); diffs "
        + ", ".join(f"{d:+.4f}" for _, d in report),
    )


def test_criterion_08_convergence_scaling():
    started = time.perf_counter()
    sizes = np.array([64, 128, 256, 512, 1024])
    sigma = 4.0
    errors = np.zeros(len(sizes))
    for seed in range(10):
        rng = np.random.default_rng(seed)
        points = rng.normal(size=(4096, 16))
        reference = von_neumann_entropy(tensor_gram(points, sigma))
        for i, n in enumerate(sizes):
            errors[i] += abs(
                von_neumann_entropy(tensor_gram(points[:n], sigma)) - reference
            )
    errors /= 10
    slope = float(np.polyfit(np.log(sizes), np.log(errors), 1)[0])
    elapsed = time.perf_counter() - started
    ok = -0.9 <= slope <= -0.25 and elapsed < 300
    check(
        8,
        "entropy estimate error shrinks like a root-N law",
        ok,
        f"log-log slope {slope:.3f} in [-0.9, -0.25] over N=64..1024 vs N=4096, "
        f"10 seeds; {elapsed:.0f}s < 300s",
    )


def test_criterion_09_permutation_null():
    started = time.perf_counter()
    rng = np.random.default_rng(909)
    x = rng.normal(size=(100, 5))
    z = rng.normal(size=(100, 5))
    a = tensor_gram(x, 8.0)
    b = tensor_gram(z, 8.0)
    observed = mutual_information(a, b, 1.0)
    null = []
    for _ in range(100):
        perm = rng.permutation(100)
        shuffled = DensityMatrix(b.values[np.ix_(perm, perm)])
        null.append(mutual_information(a, shuffled, 1.0))
    p99 = float(np.quantile(null, 0.99))
    elapsed = time.perf_counter() - started
    ok = observed < p99 and elapsed < 60
    check(
        9,
        "MI on independent data sits inside its shuffle null",
        ok,
        f"observed {observed:.4f} < 99th percentile {p99:.4f} of 100 shuffles; "
        f"{elapsed:.0f}s < 60s",
    )


def test_criterion_10_gradient_check():
    started = time.perf_counter()
    rng = np.random.default_rng(1010)
    worst = 0.0
    for activation in ("relu", "tanh"):
        model = ToyMLP((4, 7, 5, 3), activation=activation, seed=42)
        x = rng.normal(size=(5, 4))
        y = rng.integers(0, 3, size=5)
        _, grad_w, grad_b = model.loss_and_gradients(x, y)
        fd_w, fd_b = finite_difference_gradients(model, x, y, step=1e-5)
        analytic = np.concatenate([g.reshape(-1) for g in grad_w + grad_b])
        numeric = np.concatenate([g.reshape(-1) for g in fd_w + fd_b])
        worst = max(
            worst, float(np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric))
        )
    elapsed = time.perf_counter() - started
    ok = worst < 1e-6 and elapsed < 10
    check(
        10,
        "backprop matches central finite differences for relu and tanh",
        ok,
        f"max norm-relative error {worst:.2e} < 1e-6; {elapsed:.1f}s < 10s",
    )


def test_criterion_11_format_round_trip(tmp_path):
    started = time.perf_counter()
    rng = np.random.default_rng(1111)
    path = tmp_path / "roundtrip.ipd"
    exact = 0
    for _ in range(1000):
        ndim = int(rng.integers(1, 4))
        shape = (int(rng.integers(2, 7)), *rng.integers(1, 5, size=ndim))
        batch = ActivationBatch(
            layer_id=int(rng.integers(0, 40)),
            iteration=int(rng.integers(0, 100_000)),
            values=rng.normal(size=shape),
        )
        write_dump(batch, path)
        loaded = read_dump(path)
        exact += (
            loaded.values.tobytes() == batch.values.tobytes()
            and (loaded.layer_id, loaded.iteration) == (batch.layer_id, batch.iteration)
            and loaded.sample_shape == batch.sample_shape
        )

    corrupt = tmp_path / "corrupt.ipd"
    labels = ActivationBatch(
        layer_id=0, iteration=0, values=(np.arange(6) % 2).reshape(-1, 1).astype(float)
    )
    write_dump(labels, tmp_path / "labels.ipd")
    write_dump(
        ActivationBatch(layer_id=1, iteration=0, values=rng.normal(size=(6, 3))),
        corrupt,
    )
    raw = bytearray(corrupt.read_bytes())
    raw[:4] = b"BAD!"
    corrupt.write_bytes(bytes(raw))
    result = CliRunner().invoke(
        cli_main,
        ["sigma-scan", str(corrupt), "--labels", str(tmp_path / "labels.ipd")],
    )
    elapsed = time.perf_counter() - started
    ok = exact == 1000 and result.exit_code == 2 and elapsed < 30
    check(
        11,
        "dump format round-trips bit-exactly and rejects corrupt magic",
        ok,
        f"{exact}/1000 round-trips bit-exact; corrupted magic exit code "
        f"{result.exit_code} == 2; {elapsed:.1f}s < 30s",
    )
