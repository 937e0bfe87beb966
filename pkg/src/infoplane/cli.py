"""Command-line entry points tying the modules into runnable workflows.

Exit codes: 0 success, 1 numerical/internal error, 2 input or format
error. Failures emit one machine-readable line on stderr of the form
``error: module=<module> name=<ErrorName> detail=<message>``.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click
import numpy as np

from . import dataio
from .exceptions import (
    FormatError,
    InfoPlaneError,
    IoFailure,
    NumericalError,
    TooFewLayers,
    ValidationError,
)
from .harness import SyntheticDataset, ToyMLP, TrainConfig, accuracy, generate_dataset, train_epochs
from .pipeline import (
    ActivationBatch,
    PipelineConfig,
    Trajectory,
    dpi_report,
    expected_label_entropy,
    process_iteration,
    smooth_trajectory,
)
from .validation import as_label_vector
from .width import LabelKernelSpec, WidthGrid, alignment_curve, label_gram


def _failing_module(exc: BaseException) -> str:
    module = "infoplane"
    tb = exc.__traceback__
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", "")
        if name.startswith("infoplane"):
            module = name
        tb = tb.tb_next
    return module


def _exit_code(exc: InfoPlaneError) -> int:
    if isinstance(exc, (ValidationError, FormatError, IoFailure)):
        return 2
    if isinstance(exc, NumericalError):
        return 1
    return 1


def guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except InfoPlaneError as exc:
            detail = " ".join(str(exc).split())
            click.echo(
                f"error: module={_failing_module(exc)} "
                f"name={type(exc).__name__} detail={detail}",
                err=True,
            )
            sys.exit(_exit_code(exc))

    return wrapper


def estimation_options(fn):
    options = [
        click.option("--alpha", type=float, default=None, help="Entropy order (default 1: the von Neumann limit)."),
        click.option("--input-sigma", type=float, default=None, help="Fixed kernel width for the input side (default 8)."),
        click.option("--label-sigma", type=float, default=None, help="Kernel width over one-hot labels (default 0.1)."),
        click.option("--beta", type=float, default=None, help="EMA coefficient for per-layer widths (default 0.9)."),
        click.option("--grid-lo", type=float, default=None, help="Lower grid multiplier of the mean distance (default 0.1)."),
        click.option("--grid-hi", type=float, default=None, help="Upper grid multiplier of the mean distance (default 10)."),
        click.option("--grid-samples-stage1", type=int, default=None, help="Grid size before the switch iteration (default 75)."),
        click.option("--grid-samples-stage2", type=int, default=None, help="Grid size after the switch iteration (default 50)."),
        click.option("--grid-switch-iteration", type=int, default=None, help="Iteration at which the grid shrinks (default 500)."),
        click.option("--smoothing-k", type=int, default=None, help="Trailing moving-average window (default 10)."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


_CONFIG_FIELDS = (
    "alpha",
    "input_sigma",
    "label_sigma",
    "beta",
    "grid_lo",
    "grid_hi",
    "grid_samples_stage1",
    "grid_samples_stage2",
    "grid_switch_iteration",
    "smoothing_k",
)


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _effective_config(manifest, overrides) -> PipelineConfig:
    kwargs = {}
    for name in _CONFIG_FIELDS:
        value = overrides.get(name)
        if value is None and manifest is not None:
            value = getattr(manifest, name)
        if value is not None:
            kwargs[name] = value
    return PipelineConfig(**kwargs)


@click.group()
def main():
    """Information-plane analysis with matrix-based entropy over tensor kernels."""


def _estimate_run(manifest, base_dir, out_dir, config, num_classes, dpi_on):
    out_dir.mkdir(parents=True, exist_ok=True)
    states = {}
    points = []
    for input_batch, labels, layer_batches in dataio.iter_manifest_batches(manifest, base_dir):
        points.extend(
            process_iteration(input_batch, labels, num_classes, layer_batches, states, config)
        )
    raw = Trajectory(tuple(points))
    smoothed = smooth_trajectory(raw, config.smoothing_k)
    dataio.export_trajectory(raw, "csv", out_dir / "trajectory_raw.csv")
    dataio.export_trajectory(raw, "json-lines", out_dir / "trajectory_raw.jsonl")
    dataio.export_trajectory(smoothed, "csv", out_dir / "trajectory_smoothed.csv")
    dataio.export_trajectory(smoothed, "json-lines", out_dir / "trajectory_smoothed.jsonl")

    report_source = smoothed if dpi_on == "smoothed" else raw
    try:
        report_lines, _ = _format_dpi(dpi_report(report_source), dpi_on)
    except TooFewLayers:
        report_lines = ["data processing inequality report: skipped, single layer"]
    _write_text(out_dir / "dpi_report.txt", "\n".join(report_lines) + "\n")

    layer_ids = raw.layer_ids()
    iterations = len({p.iteration for p in raw.points})
    click.echo(f"trajectory: {len(raw)} points ({iterations} iterations x {len(layer_ids)} layers)")
    final_layer = smoothed.layer_series(layer_ids[-1])
    ceiling = expected_label_entropy([1] * num_classes)
    click.echo(
        f"final layer smoothed: I(X;T) = {final_layer[-1].mi_input:.6f} bits, "
        f"I(T;Y) = {final_layer[-1].mi_label:.6f} bits "
        f"(balanced label-entropy ceiling {ceiling:.6f})"
    )
    for line in report_lines:
        click.echo(line)
    return raw, smoothed


def _format_dpi(report, source_name):
    lines = [f"data processing inequality report ({source_name} trajectory)"]
    compliant = 0
    for (first, second), diff in report:
        mark = "ok" if diff >= 0 else "VIOLATION"
        lines.append(
            f"layer {first} -> layer {second}: mean I(X;T_{first}) - I(X;T_{second}) "
            f"= {diff:+.6f} bits [{mark}]"
        )
        compliant += diff >= 0
    lines.append(f"compliant adjacent pairs: {compliant} of {len(report)}")
    return lines, compliant


@main.command("estimate")
@click.argument("manifest_path", type=click.Path())
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Output directory (default: next to the manifest).")
@click.option("--dpi-on", type=click.Choice(["smoothed", "raw"]), default="smoothed", show_default=True, help="Trajectory the DPI report is computed on.")
@estimation_options
@guarded
def cmd_estimate(manifest_path, out_dir, dpi_on, **overrides):
    """Estimate IP trajectories from a run manifest and its dumps."""
    manifest_path = Path(manifest_path)
    manifest = dataio.read_manifest(manifest_path)
    config = _effective_config(manifest, overrides)
    out = Path(out_dir) if out_dir else manifest_path.parent
    _estimate_run(manifest, manifest_path.parent, out, config, manifest.num_classes, dpi_on)


@main.command("train-demo")
@click.option("--out", "out_dir", type=click.Path(), required=True, help="Output directory for dumps, manifest, logs, trajectories.")
@click.option("--classes", type=int, default=10, show_default=True, help="Number of blob classes.")
@click.option("--dim", type=int, default=16, show_default=True, help="Input dimensionality.")
@click.option("--samples", type=int, default=2000, show_default=True, help="Training-set size (balanced across classes).")
@click.option("--separation", type=float, default=5.0, show_default=True, help="Scale of the class-mean spread.")
@click.option("--noise", type=float, default=1.0, show_default=True, help="Within-class isotropic noise.")
@click.option("--hidden", default="32,16,16", show_default=True, help="Comma-separated hidden-layer widths.")
@click.option("--activation", type=click.Choice(["relu", "tanh"]), default="relu", show_default=True)
@click.option("--lr", type=float, default=0.09, show_default=True, help="SGD learning rate.")
@click.option("--batch-size", type=int, default=100, show_default=True)
@click.option("--epochs", type=int, default=15, show_default=True)
@click.option("--capture-every", type=int, default=1, show_default=True, help="Capture activations every this many iterations.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dpi-on", type=click.Choice(["smoothed", "raw"]), default="smoothed", show_default=True)
@estimation_options
@guarded
def cmd_train_demo(out_dir, classes, dim, samples, separation, noise, hidden, activation,
                   lr, batch_size, epochs, capture_every, seed, dpi_on, **overrides):
    """Generate blobs, train the toy MLP, dump activations, and estimate the IP."""
    out = Path(out_dir)
    dumps = out / "dumps"
    dumps.mkdir(parents=True, exist_ok=True)

    spec = SyntheticDataset(
        num_classes=classes, dim=dim, n_train=samples,
        separation=separation, noise=noise, seed=seed,
    )
    inputs, labels = generate_dataset(spec)
    widths = tuple(int(w) for w in hidden.split(",") if w.strip())
    model = ToyMLP((dim, *widths, classes), activation=activation, seed=seed)
    train_config = TrainConfig(
        lr=lr, batch_size=batch_size, epochs=epochs,
        capture_every=capture_every, seed=seed + 1,
    )

    layer_names = [f"hidden{i}" for i in range(1, len(widths) + 1)] + ["softmax"]
    records = []
    log_rows = ["iteration,loss,train_accuracy"]
    for step in train_epochs(model, inputs, labels, train_config):
        log_rows.append(f"{step.iteration},{step.loss:.9g},{step.batch_accuracy:.9g}")
        if step.layer_batches is None:
            continue
        it = step.iteration
        input_rel = f"dumps/it{it:06d}_input.ipd"
        labels_rel = f"dumps/it{it:06d}_labels.ipd"
        dataio.write_dump(step.input_batch, out / input_rel)
        dataio.write_dump(
            ActivationBatch(
                layer_id=0, iteration=it,
                values=step.labels.reshape(-1, 1).astype(float),
            ),
            out / labels_rel,
        )
        layer_rels = {}
        for batch in step.layer_batches:
            rel = f"dumps/it{it:06d}_layer{batch.layer_id:02d}.ipd"
            dataio.write_dump(batch, out / rel)
            layer_rels[batch.layer_id] = rel
        records.append(
            dataio.IterationFiles(iteration=it, input=input_rel, labels=labels_rel, layers=layer_rels)
        )

    _write_text(out / "train_log.csv", "\n".join(log_rows) + "\n")
    final_accuracy = accuracy(model, inputs, labels)
    click.echo(f"training done: final train accuracy {final_accuracy:.4f}")

    config = _effective_config(None, overrides)
    manifest = dataio.RunManifest(
        run_id=f"train-demo-seed{seed}",
        num_classes=classes,
        batch_size=batch_size,
        layers=tuple(zip(range(1, len(layer_names) + 1), layer_names)),
        alpha=config.alpha,
        input_sigma=config.input_sigma,
        label_sigma=config.label_sigma,
        beta=config.beta,
        grid_lo=config.grid_lo,
        grid_hi=config.grid_hi,
        grid_samples_stage1=config.grid_samples_stage1,
        grid_samples_stage2=config.grid_samples_stage2,
        grid_switch_iteration=config.grid_switch_iteration,
        smoothing_k=config.smoothing_k,
        iterations=tuple(records),
    )
    dataio.write_manifest(manifest, out / "manifest.json")
    _estimate_run(manifest, out, out, config, classes, dpi_on)


@main.command("sigma-scan")
@click.argument("dump_path", type=click.Path())
@click.option("--labels", "labels_path", type=click.Path(), required=True, help="Label dump for the same iteration.")
@click.option("--num-classes", type=int, default=None, help="Class count (default: inferred from the labels).")
@click.option("--label-sigma", type=float, default=0.1, show_default=True)
@click.option("--grid-lo", type=float, default=0.1, show_default=True)
@click.option("--grid-hi", type=float, default=10.0, show_default=True)
@click.option("--grid-samples", type=int, default=75, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None, help="Write CSV here instead of stdout.")
@guarded
def cmd_sigma_scan(dump_path, labels_path, num_classes, label_sigma, grid_lo, grid_hi, grid_samples, out_path):
    """Emit the full (sigma, alignment) curve for one activation dump."""
    batch = dataio.read_dump(dump_path)
    label_batch = dataio.read_dump(labels_path)
    raw_labels = label_batch.flat().reshape(-1)
    k = num_classes if num_classes is not None else int(raw_labels.max()) + 1
    y = as_label_vector(raw_labels, k)
    gram_y = label_gram(y, LabelKernelSpec(label_sigma), k)
    grid = WidthGrid(grid_lo, grid_hi, grid_samples)
    sigmas, alignments = alignment_curve(batch.flat(), gram_y, grid)
    best = int(np.argmax(alignments))
    lines = ["sigma,alignment,selected"]
    for i, (sigma, alignment) in enumerate(zip(sigmas, alignments)):
        lines.append(f"{sigma:.9g},{alignment:.9g},{int(i == best)}")
    text = "\n".join(lines) + "\n"
    if out_path:
        _write_text(Path(out_path), text)
        click.echo(f"selected sigma {sigmas[best]:.9g} (alignment {alignments[best]:.9g})")
    else:
        click.echo(text, nl=False)


@main.command("dpi")
@click.argument("trajectory_path", type=click.Path())
@guarded
def cmd_dpi(trajectory_path):
    """Print the DPI report for an exported trajectory file."""
    traj = dataio.read_trajectory(trajectory_path)
    lines, _ = _format_dpi(dpi_report(traj), "loaded")
    for line in lines:
        click.echo(line)


if __name__ == "__main__":
    main()
