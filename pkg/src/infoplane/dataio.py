"""On-disk formats: activation dumps, run manifests, and trajectory export.

Activation dump ("IPD1"), a little-endian binary file:

    offset  size       field
    0       4          magic, ASCII "IPD1"
    4       2          format version (u16), currently 1
    6       1          dtype code (u8): 0 = float32, 1 = float64
    7       2          layer id (u16)
    9       4          iteration (u32)
    13      4          sample count N (u32)
    17      1          ndim (u8), number of per-sample dimensions
    18      4*ndim     dims (u32 each)
    ...     payload    N * prod(dims) values, row-major, sample index slowest

Magic and version must match exactly on read, and the payload length must
equal N * prod(dims) * itemsize; anything else is a ParseError. A write
followed by a read round-trips bit-exactly for the matching dtype; float32
payloads are widened exactly to float64 on read.

The run manifest is a human-readable JSON document listing the run
configuration and, per captured iteration, the input dump, the label dump,
and one dump per layer. Trajectories export to CSV or JSON lines with one
row per (iteration, layer), ordered lexicographically, numbers printed
with 9 significant digits.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import EmptyTrajectory, IoFailure, ParseError, ValidationError
from .pipeline import ActivationBatch, IPPoint, Trajectory

MAGIC = b"IPD1"
VERSION = 1
_DTYPE_CODES = {"f32": 0, "f64": 1}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_HEADER = struct.Struct("<4sHBHIIB")

TRAJECTORY_COLUMNS = (
    "iteration",
    "layer_id",
    "mi_input_bits",
    "mi_label_bits",
    "sigma",
    "s_t",
    "s_x",
    "s_y",
    "s_joint_xt",
    "s_joint_ty",
)


def write_dump(batch: ActivationBatch, path, dtype: str = "f64") -> None:
    """Serialize one activation batch; see the module docstring for the layout."""
    if dtype not in _DTYPE_CODES:
        raise ValidationError(f"dtype must be one of {sorted(_DTYPE_CODES)}, got {dtype!r}")
    code = _DTYPE_CODES[dtype]
    dims = batch.sample_shape
    header = _HEADER.pack(
        MAGIC, VERSION, code, batch.layer_id, batch.iteration, batch.n, len(dims)
    ) + struct.pack(f"<{len(dims)}I", *dims)
    payload = np.ascontiguousarray(batch.values, dtype=_CODE_DTYPES[code]).tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_dump(path) -> ActivationBatch:
    """Parse and validate one activation dump; payloads widen to float64."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise ParseError(f"{path}: file shorter than the fixed header")
    magic, version, code, layer_id, iteration, n, ndim = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ParseError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ParseError(f"{path}: unsupported version {version}, expected {VERSION}")
    if code not in _CODE_DTYPES:
        raise ParseError(f"{path}: unknown dtype code {code}")
    offset = _HEADER.size + 4 * ndim
    if len(raw) < offset:
        raise ParseError(f"{path}: truncated dims block")
    dims = struct.unpack_from(f"<{ndim}I", raw, _HEADER.size)
    dtype = _CODE_DTYPES[code]
    expected = n * int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    payload = raw[offset:]
    if len(payload) != expected:
        raise ParseError(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    values = np.frombuffer(payload, dtype=dtype).reshape((n, *dims)).astype(np.float64)
    return ActivationBatch(layer_id=layer_id, iteration=iteration, values=values)


@dataclass(frozen=True)
class IterationFiles:
    """Dump paths for one captured iteration (paths relative to the manifest)."""

    iteration: int
    input: str
    labels: str
    layers: dict[int, str]


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to re-estimate a run from its dumps."""

    run_id: str
    num_classes: int
    batch_size: int
    layers: tuple[tuple[int, str], ...]  # (layer_id, name), in chain order
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
    iterations: tuple[IterationFiles, ...] = field(default_factory=tuple)

    def to_json(self) -> str:
        doc = asdict(self)
        doc["layers"] = [{"id": lid, "name": name} for lid, name in self.layers]
        doc["iterations"] = [
            {
                "iteration": it.iteration,
                "input": it.input,
                "labels": it.labels,
                "layers": {str(lid): p for lid, p in sorted(it.layers.items())},
            }
            for it in self.iterations
        ]
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        try:
            doc = json.loads(text)
            layers = tuple((int(d["id"]), str(d["name"])) for d in doc["layers"])
            iterations = tuple(
                IterationFiles(
                    iteration=int(d["iteration"]),
                    input=d["input"],
                    labels=d["labels"],
                    layers={int(k): v for k, v in d["layers"].items()},
                )
                for d in doc["iterations"]
            )
            known = {
                k: doc[k]
                for k in (
                    "run_id",
                    "num_classes",
                    "batch_size",
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
                if k in doc
            }
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed manifest: {exc}") from exc
        return cls(layers=layers, iterations=iterations, **known)


def write_manifest(manifest: RunManifest, path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(manifest.to_json())
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_manifest(path) -> RunManifest:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return RunManifest.from_json(fh.read())
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def _read_referenced(base: Path, rel: str) -> ActivationBatch:
    # A manifest promises that every referenced dump exists and parses, so
    # a missing file is a manifest-level parse failure, not a plain IO one.
    try:
        return read_dump(base / rel)
    except IoFailure as exc:
        raise ParseError(f"manifest references unreadable dump {rel}: {exc}") from exc


def iter_manifest_batches(manifest: RunManifest, base_dir):
    """Yield (input_batch, labels, layer_batches) per iteration, in order.

    Each referenced dump is read exactly once. Layer ids found in the dumps
    must match the manifest's layer list exactly.
    """
    base = Path(base_dir)
    declared = {lid for lid, _ in manifest.layers}
    for record in sorted(manifest.iterations, key=lambda r: r.iteration):
        input_batch = _read_referenced(base, record.input)
        label_batch = _read_referenced(base, record.labels)
        labels = label_batch.flat().reshape(-1)
        layer_batches = []
        seen = set()
        for lid, rel in sorted(record.layers.items()):
            batch = _read_referenced(base, rel)
            if batch.layer_id != lid:
                raise ParseError(
                    f"{rel}: dump says layer {batch.layer_id}, manifest says {lid}"
                )
            seen.add(lid)
            layer_batches.append(batch)
        if seen != declared:
            raise ParseError(
                f"iteration {record.iteration}: manifest layers {sorted(declared)} "
                f"but dumps cover {sorted(seen)}"
            )
        yield input_batch, labels, layer_batches


def _format(value: float) -> str:
    return f"{value:.9g}"


def _point_row(point: IPPoint) -> list[str]:
    return [
        str(point.iteration),
        str(point.layer_id),
        _format(point.mi_input),
        _format(point.mi_label),
        _format(point.sigma),
        _format(point.s_t),
        _format(point.s_x),
        _format(point.s_y),
        _format(point.s_joint_xt),
        _format(point.s_joint_ty),
    ]


def export_trajectory(traj: Trajectory, fmt: str, path) -> None:
    """Write a trajectory as "csv" or "json-lines", one row per (iteration, layer)."""
    if not traj.points:
        raise EmptyTrajectory("refusing to export a trajectory with no points")
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(TRAJECTORY_COLUMNS)
        for point in traj.points:
            writer.writerow(_point_row(point))
        text = buffer.getvalue()
    elif fmt == "json-lines":
        lines = []
        for point in traj.points:
            row = _point_row(point)
            doc = {
                name: (int(cell) if name in ("iteration", "layer_id") else float(cell))
                for name, cell in zip(TRAJECTORY_COLUMNS, row)
            }
            lines.append(json.dumps(doc))
        text = "\n".join(lines) + "\n"
    else:
        raise ValidationError(f"format must be 'csv' or 'json-lines', got {fmt!r}")
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_trajectory(path, smoothing_k: int = 1) -> Trajectory:
    """Re-import an exported trajectory (format inferred from the extension)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    rows = []
    name = str(path)
    try:
        if name.endswith(".csv"):
            reader = csv.reader(io.StringIO(text))
            header = next(reader, None)
            if header != list(TRAJECTORY_COLUMNS):
                raise ParseError(f"{path}: unexpected CSV header {header}")
            rows = [dict(zip(TRAJECTORY_COLUMNS, row)) for row in reader if row]
        else:
            rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        points = tuple(
            IPPoint(
                iteration=int(row["iteration"]),
                layer_id=int(row["layer_id"]),
                mi_input=float(row["mi_input_bits"]),
                mi_label=float(row["mi_label_bits"]),
                sigma=float(row["sigma"]),
                s_t=float(row["s_t"]),
                s_x=float(row["s_x"]),
                s_y=float(row["s_y"]),
                s_joint_xt=float(row["s_joint_xt"]),
                s_joint_ty=float(row["s_joint_ty"]),
            )
            for row in rows
        )
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: malformed trajectory file: {exc}") from exc
    if not points:
        raise EmptyTrajectory(f"{path}: no trajectory rows")
    return Trajectory(points, smoothing_k=smoothing_k)
