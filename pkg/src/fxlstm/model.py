"""Network parameters, input windows, and their file formats.

The architecture is one LSTM layer of up to 20 cells over 96 timesteps
of 4-channel input, followed by a 20-neuron fully-connected layer with
ReLU and a 2-neuron output layer.  At the default shape the parameter
count is exactly 2462:

    U 1600 + W 320 + B 80 + FC1 400+20 + FC2 40+2

Gate order everywhere (tensors, SRAM words, schedules) is (i, f, g, o).
Per cell and gate, U holds the ``num_cells`` recurrent weights and W the
``input_channels`` input weights; the FC layers are fixed at 20 and 2
neurons with 20 inputs each (the cell-state vector is zero-padded when
fewer than 20 cells are configured).

Input samples are always quantized into FxP(10,8).  Model files are JSON
with one named entry per tensor; datasets are CSV with columns
``step_id, sample_idx, gx, gy, gz, mag, label``.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fxp import (
    FxpFormat,
    OverflowCounter,
    RoundingMode,
    parse_format,
    quantize_array,
)

__all__ = [
    "GATES",
    "LABELS",
    "INPUT_FMT",
    "FC1_NEURONS",
    "FC2_NEURONS",
    "SCHEMA_VERSION",
    "SchemaError",
    "ModelParams",
    "QuantizedModel",
    "GaitWindow",
    "Step",
    "quantize_model",
    "load_model",
    "save_model",
    "load_quantized",
    "save_quantized",
    "gen_fixture_model",
    "make_windows",
    "load_dataset",
    "windows_from_dataset",
    "save_dataset",
]

log = logging.getLogger(__name__)

GATES = ("i", "f", "g", "o")
LABELS = ("normal", "abnormal")
INPUT_FMT = FxpFormat(10, 8)
FC1_NEURONS = 20
FC2_NEURONS = 2
FC_INPUTS = 20
SCHEMA_VERSION = 1


class SchemaError(ValueError):
    """A model or dataset file violates its schema."""


@dataclass
class ModelParams:
    """Full-precision parameters, one float64 array per tensor.

    Shapes: u (4, N, N), w (4, N, D), b (4, N), fc1_w (20, 20),
    fc1_b (20,), fc2_w (2, 20), fc2_b (2,).  Axis 0 of the gate tensors
    follows :data:`GATES`.
    """

    num_cells: int
    input_channels: int
    timesteps: int
    u: np.ndarray
    w: np.ndarray
    b: np.ndarray
    fc1_w: np.ndarray
    fc1_b: np.ndarray
    fc2_w: np.ndarray
    fc2_b: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        _check_shapes(self, np.floating)

    @property
    def param_count(self) -> int:
        return sum(
            t.size
            for t in (self.u, self.w, self.b, self.fc1_w, self.fc1_b, self.fc2_w, self.fc2_b)
        )


@dataclass
class QuantizedModel:
    """The same tensors as int64 raws in a single parameter format."""

    num_cells: int
    input_channels: int
    timesteps: int
    fmt: FxpFormat
    u: np.ndarray
    w: np.ndarray
    b: np.ndarray
    fc1_w: np.ndarray
    fc1_b: np.ndarray
    fc2_w: np.ndarray
    fc2_b: np.ndarray

    def __post_init__(self):
        _check_shapes(self, np.integer)
        for name, t in _named_tensors(self):
            if t.size and (t.min() < self.fmt.min_raw or t.max() > self.fmt.max_raw):
                raise SchemaError(f"{name}: raw value outside {self.fmt} range")

    @property
    def param_count(self) -> int:
        return sum(t.size for _, t in _named_tensors(self))

    @property
    def total_param_bits(self) -> int:
        return self.param_count * self.fmt.total_bits


def _named_tensors(m) -> list[tuple[str, np.ndarray]]:
    return [
        ("u", m.u),
        ("w", m.w),
        ("b", m.b),
        ("fc1.w", m.fc1_w),
        ("fc1.b", m.fc1_b),
        ("fc2.w", m.fc2_w),
        ("fc2.b", m.fc2_b),
    ]


def _check_shapes(m, kind) -> None:
    n, d = m.num_cells, m.input_channels
    if not (1 <= n <= 20):
        raise SchemaError(f"num_cells must be in [1, 20], got {n}")
    if d < 1:
        raise SchemaError(f"input_channels must be >= 1, got {d}")
    if m.timesteps < 1:
        raise SchemaError(f"timesteps must be >= 1, got {m.timesteps}")
    expected = {
        "u": (4, n, n),
        "w": (4, n, d),
        "b": (4, n),
        "fc1.w": (FC1_NEURONS, FC_INPUTS),
        "fc1.b": (FC1_NEURONS,),
        "fc2.w": (FC2_NEURONS, FC_INPUTS),
        "fc2.b": (FC2_NEURONS,),
    }
    for name, t in _named_tensors(m):
        if t.shape != expected[name]:
            raise SchemaError(f"{name}: expected shape {expected[name]}, got {t.shape}")
        if not np.issubdtype(t.dtype, kind):
            raise SchemaError(f"{name}: expected {kind.__name__} dtype, got {t.dtype}")


def quantize_model(
    params: ModelParams,
    fmt: FxpFormat,
    mode: RoundingMode = RoundingMode.NEAREST_TIES_AWAY,
    counter: OverflowCounter | None = None,
) -> QuantizedModel:
    """Quantize every parameter into ``fmt`` (clamping, counted per site)."""
    q = lambda t: quantize_array(t, fmt, mode, counter, "params")
    return QuantizedModel(
        num_cells=params.num_cells,
        input_channels=params.input_channels,
        timesteps=params.timesteps,
        fmt=fmt,
        u=q(params.u),
        w=q(params.w),
        b=q(params.b),
        fc1_w=q(params.fc1_w),
        fc1_b=q(params.fc1_b),
        fc2_w=q(params.fc2_w),
        fc2_b=q(params.fc2_b),
    )


# ---------------------------------------------------------------------------
# model JSON


def _gate_dict(t: np.ndarray) -> dict:
    return {g: t[k].tolist() for k, g in enumerate(GATES)}


def _gate_stack(obj: dict, name: str, dtype) -> np.ndarray:
    if not isinstance(obj, dict):
        raise SchemaError(f"{name}: expected an object with gate keys {GATES}")
    missing = [g for g in GATES if g not in obj]
    if missing:
        raise SchemaError(f"{name}: missing gate entries {missing}")
    try:
        return np.stack([np.asarray(obj[g], dtype=dtype) for g in GATES])
    except ValueError as e:
        raise SchemaError(f"{name}: ragged or non-numeric data ({e})") from None


def save_model(params: ModelParams, path: str | Path) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "num_cells": params.num_cells,
        "input_channels": params.input_channels,
        "timesteps": params.timesteps,
        "u": _gate_dict(params.u),
        "w": _gate_dict(params.w),
        "b": _gate_dict(params.b),
        "fc1": {"w": params.fc1_w.tolist(), "b": params.fc1_b.tolist()},
        "fc2": {"w": params.fc2_w.tolist(), "b": params.fc2_b.tolist()},
    }
    if params.meta:
        doc["training"] = params.meta
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_model(path: str | Path) -> ModelParams:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: not valid JSON ({e})") from None
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: top level must be an object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version!r}")
    for key in ("num_cells", "input_channels", "timesteps", "u", "w", "b", "fc1", "fc2"):
        if key not in doc:
            raise SchemaError(f"missing required key {key!r}")
    try:
        fc1_w = np.asarray(doc["fc1"]["w"], dtype=np.float64)
        fc1_b = np.asarray(doc["fc1"]["b"], dtype=np.float64)
        fc2_w = np.asarray(doc["fc2"]["w"], dtype=np.float64)
        fc2_b = np.asarray(doc["fc2"]["b"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"fc1/fc2: malformed ({e})") from None
    return ModelParams(
        num_cells=int(doc["num_cells"]),
        input_channels=int(doc["input_channels"]),
        timesteps=int(doc["timesteps"]),
        u=_gate_stack(doc["u"], "u", np.float64),
        w=_gate_stack(doc["w"], "w", np.float64),
        b=_gate_stack(doc["b"], "b", np.float64),
        fc1_w=fc1_w,
        fc1_b=fc1_b,
        fc2_w=fc2_w,
        fc2_b=fc2_b,
        meta=doc.get("training", {}),
    )


def save_quantized(qm: QuantizedModel, path: str | Path) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "param_format": str(qm.fmt),
        "num_cells": qm.num_cells,
        "input_channels": qm.input_channels,
        "timesteps": qm.timesteps,
        "total_param_bits": qm.total_param_bits,
        "u": _gate_dict(qm.u),
        "w": _gate_dict(qm.w),
        "b": _gate_dict(qm.b),
        "fc1": {"w": qm.fc1_w.tolist(), "b": qm.fc1_b.tolist()},
        "fc2": {"w": qm.fc2_w.tolist(), "b": qm.fc2_b.tolist()},
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_quantized(path: str | Path) -> QuantizedModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: not valid JSON ({e})") from None
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {doc.get('schema_version')!r}")
    if "param_format" not in doc:
        raise SchemaError("missing required key 'param_format'")
    return QuantizedModel(
        num_cells=int(doc["num_cells"]),
        input_channels=int(doc["input_channels"]),
        timesteps=int(doc["timesteps"]),
        fmt=parse_format(doc["param_format"]),
        u=_gate_stack(doc["u"], "u", np.int64),
        w=_gate_stack(doc["w"], "w", np.int64),
        b=_gate_stack(doc["b"], "b", np.int64),
        fc1_w=np.asarray(doc["fc1"]["w"], dtype=np.int64),
        fc1_b=np.asarray(doc["fc1"]["b"], dtype=np.int64),
        fc2_w=np.asarray(doc["fc2"]["w"], dtype=np.int64),
        fc2_b=np.asarray(doc["fc2"]["b"], dtype=np.int64),
    )


def gen_fixture_model(
    seed: int,
    num_cells: int = 20,
    input_channels: int = 4,
    timesteps: int = 96,
    weight_scale: float = 1.0,
) -> ModelParams:
    """Deterministic pseudo-random fixture model.

    Procedure (PCG64 stream seeded with ``seed``, draws in this order):
    u, w as uniform [-0.5, 0.5) * weight_scale; b as uniform [-0.1, 0.1);
    then fc1.w, fc1.b, fc2.w, fc2.b with the same weight/bias ranges.
    The forget-gate bias is offset by +0.5 afterwards.  ``weight_scale``
    above 1 builds over-driven fixtures for saturation studies.
    """
    rng = np.random.default_rng(seed)
    n, d = num_cells, input_channels
    wr = lambda shape: rng.uniform(-0.5, 0.5, shape) * weight_scale
    br = lambda shape: rng.uniform(-0.1, 0.1, shape)
    u = wr((4, n, n))
    w = wr((4, n, d))
    b = br((4, n))
    b[GATES.index("f")] += 0.5
    return ModelParams(
        num_cells=n,
        input_channels=d,
        timesteps=timesteps,
        u=u,
        w=w,
        b=b,
        fc1_w=wr((FC1_NEURONS, FC_INPUTS)),
        fc1_b=br((FC1_NEURONS,)),
        fc2_w=wr((FC2_NEURONS, FC_INPUTS)),
        fc2_b=br((FC2_NEURONS,)),
    )


# ---------------------------------------------------------------------------
# windows and datasets


@dataclass(frozen=True)
class GaitWindow:
    """One window of samples quantized into FxP(10,8), with its label.

    ``raws`` has shape (timesteps, channels), dtype int16.
    """

    raws: np.ndarray
    label: int
    step_id: str
    offset: int

    @property
    def window_id(self) -> str:
        return f"{self.step_id}:{self.offset}"

    @property
    def values(self) -> np.ndarray:
        """Exact real values of the quantized samples."""
        return self.raws.astype(np.float64) / INPUT_FMT.scale

    @staticmethod
    def from_real(
        samples: np.ndarray, label: int, step_id: str = "w", offset: int = 0
    ) -> "GaitWindow":
        raws = quantize_array(samples, INPUT_FMT).astype(np.int16)
        return GaitWindow(raws=raws, label=int(label), step_id=step_id, offset=offset)


@dataclass
class Step:
    """One labeled walking step: samples (length, channels) in real units."""

    step_id: str
    samples: np.ndarray
    label: int


def make_windows(
    samples: np.ndarray,
    label: int,
    step_id: str = "step",
    window_len: int = 96,
    stride: int = 16,
) -> list[GaitWindow]:
    """Slice a step into windows at offsets 0, stride, 2*stride, ...

    Windows must lie fully inside the step; a step shorter than
    ``window_len`` yields no windows.
    """
    if stride < 1:
        raise ValueError(f"stride must be positive, got {stride}")
    length = samples.shape[0]
    if length < window_len:
        log.warning(
            "step %s has %d samples, shorter than window length %d; no windows",
            step_id, length, window_len,
        )
        return []
    return [
        GaitWindow.from_real(samples[off : off + window_len], label, step_id, off)
        for off in range(0, length - window_len + 1, stride)
    ]


DATASET_COLUMNS = ["step_id", "sample_idx", "gx", "gy", "gz", "mag", "label"]


def save_dataset(steps: list[Step], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DATASET_COLUMNS)
        for step in steps:
            label = LABELS[step.label]
            for idx, row in enumerate(step.samples):
                writer.writerow([step.step_id, idx, *[repr(float(v)) for v in row], label])


def load_dataset(path: str | Path) -> list[Step]:
    """Read a dataset CSV into steps, preserving first-appearance order."""
    order: list[str] = []
    rows: dict[str, list[tuple[int, list[float], int]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != DATASET_COLUMNS:
            raise SchemaError(f"{path}: expected header {DATASET_COLUMNS}, got {header}")
        for ln, row in enumerate(reader, start=2):
            if len(row) != len(DATASET_COLUMNS):
                raise SchemaError(f"{path}:{ln}: expected {len(DATASET_COLUMNS)} fields")
            sid, idx_s, gx, gy, gz, mag, label = row
            if label not in LABELS:
                raise SchemaError(f"{path}:{ln}: unknown label {label!r}")
            try:
                entry = (int(idx_s), [float(gx), float(gy), float(gz), float(mag)],
                         LABELS.index(label))
            except ValueError:
                raise SchemaError(f"{path}:{ln}: non-numeric sample") from None
            if sid not in rows:
                rows[sid] = []
                order.append(sid)
            rows[sid].append(entry)
    steps = []
    for sid in order:
        entries = sorted(rows[sid], key=lambda e: e[0])
        labels = {e[2] for e in entries}
        if len(labels) != 1:
            raise SchemaError(f"step {sid}: label must be constant within a step")
        samples = np.array([e[1] for e in entries], dtype=np.float64)
        steps.append(Step(step_id=sid, samples=samples, label=labels.pop()))
    return steps


def windows_from_dataset(
    steps: list[Step], window_len: int = 96, stride: int = 16
) -> list[GaitWindow]:
    out: list[GaitWindow] = []
    for step in steps:
        out.extend(make_windows(step.samples, step.label, step.step_id, window_len, stride))
    return out
