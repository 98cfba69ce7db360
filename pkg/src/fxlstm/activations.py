"""Piecewise-quadratic sigmoid/tanh approximations and ReLU.

Both nonlinearities are covered by six half-open segments: a constant
tail on each side and four quadratics in between.  A value sitting
exactly on a breakpoint belongs to the segment whose *upper* bound it
equals (-3 < x <= 0 style intervals), which leaves the printed tables'
small jump at 0 intact rather than smoothing it.

Two evaluation paths exist and are kept deliberately separate:

* real-coefficient evaluation in doubles (the full-precision network);
* fixed-point evaluation with every coefficient and intermediate in
  FxP(18,13), squarings and coefficient products rounded into FxP(18,13),
  the three terms summed exactly, and one final requantization into the
  caller's datapath format.

Inputs reach the fixed-point path in the datapath operation format and
are requantized into FxP(18,13) first; for every operation format with
f <= 13 and fewer than four integer bits that conversion is an exact
left shift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .fxp import (
    FxpFormat,
    FxpValue,
    OverflowCounter,
    RoundingMode,
    quantize,
    requant_raw,
    requant_raw_array,
)

__all__ = [
    "ActivationKind",
    "PiecewisePoly",
    "SIGMOID_POLY",
    "TANH_POLY",
    "INTERNAL_FMT",
    "act_eval",
    "act_eval_raw",
    "act_eval_raw_array",
    "act_eval_real",
    "act_eval_real_array",
    "relu",
    "reference_activation",
    "measure_approx_error",
]

INTERNAL_FMT = FxpFormat(18, 13)


class ActivationKind(Enum):
    SIGMOID = "sigmoid"
    TANH = "tanh"
    RELU = "relu"


@dataclass(frozen=True)
class Segment:
    """One piece: applies where x <= upper (upper None = +inf)."""

    upper: float | None
    a2: float
    a1: float
    a0: float


class PiecewisePoly:
    """Segment table plus its FxP(18,13) quantized twin."""

    def __init__(self, kind: ActivationKind, segments: list[Segment]):
        self.kind = kind
        self.segments = segments
        s = INTERNAL_FMT.scale
        # Segment boundaries are small integers, exactly representable.
        self.upper_raw = [
            None if seg.upper is None else int(seg.upper * s) for seg in segments
        ]
        self._qcache: dict[RoundingMode, list[tuple[int, int, int]]] = {}

    def quantized_coeffs(self, mode: RoundingMode) -> list[tuple[int, int, int]]:
        """(a2, a1, a0) raws in FxP(18,13) per segment."""
        if mode not in self._qcache:
            self._qcache[mode] = [
                (
                    quantize(seg.a2, INTERNAL_FMT, mode).raw,
                    quantize(seg.a1, INTERNAL_FMT, mode).raw,
                    quantize(seg.a0, INTERNAL_FMT, mode).raw,
                )
                for seg in self.segments
            ]
        return self._qcache[mode]

    def segment_index(self, x: float) -> int:
        for i, seg in enumerate(self.segments):
            if seg.upper is None or x <= seg.upper:
                return i
        raise AssertionError("unreachable: last segment is unbounded")

    def eval_real(self, x: float) -> float:
        seg = self.segments[self.segment_index(x)]
        return (seg.a2 * x + seg.a1) * x + seg.a0


SIGMOID_POLY = PiecewisePoly(
    ActivationKind.SIGMOID,
    [
        Segment(-6.0, 0.0, 0.0, 0.0),
        Segment(-3.0, 0.00642, 0.07176, 0.20323),
        Segment(0.0, 0.04059, 0.27269, 0.50195),
        Segment(3.0, -0.04058, 0.27266, 0.49805),
        Segment(6.0, -0.00642, 0.07175, 0.79675),
        Segment(None, 0.0, 0.0, 1.0),
    ],
)

TANH_POLY = PiecewisePoly(
    ActivationKind.TANH,
    [
        Segment(-3.0, 0.0, 0.0, -1.0),
        Segment(-1.0, 0.09007, 0.46527, -0.39814),
        Segment(0.0, 0.31592, 1.08381, 0.00314),
        Segment(1.0, -0.31676, 1.08538, -0.00349),
        Segment(3.0, -0.09013, 0.46509, 0.39878),
        Segment(None, 0.0, 0.0, 1.0),
    ],
)

_POLYS = {ActivationKind.SIGMOID: SIGMOID_POLY, ActivationKind.TANH: TANH_POLY}

_F13 = INTERNAL_FMT.frac_bits


def _poly_for(kind: ActivationKind) -> PiecewisePoly:
    if kind is ActivationKind.RELU:
        raise ValueError("ReLU has no polynomial table")
    return _POLYS[kind]


def act_eval_raw(
    kind: ActivationKind,
    x_raw: int,
    x_frac: int,
    out_fmt: FxpFormat,
    mode: RoundingMode = RoundingMode.NEAREST_TIES_AWAY,
    counter: OverflowCounter | None = None,
) -> int:
    """Fixed-point activation on a raw integer; returns a raw in out_fmt."""
    poly = _poly_for(kind)
    x13 = requant_raw(x_raw, x_frac, INTERNAL_FMT, mode, counter, "act.in")
    idx = 0
    for i, upper in enumerate(poly.upper_raw):
        if upper is None or x13 <= upper:
            idx = i
            break
    a2, a1, a0 = poly.quantized_coeffs(mode)[idx]
    if a2 == 0 and a1 == 0:
        # Constant tails: the exact constant quantized into the output format.
        return requant_raw(a0, _F13, out_fmt, mode, counter, "act.out")
    x2 = requant_raw(x13 * x13, 2 * _F13, INTERNAL_FMT, mode, counter, "act.mul")
    t2 = requant_raw(a2 * x2, 2 * _F13, INTERNAL_FMT, mode, counter, "act.mul")
    t1 = requant_raw(a1 * x13, 2 * _F13, INTERNAL_FMT, mode, counter, "act.mul")
    acc = t2 + t1 + a0  # exact, all at f=13
    return requant_raw(acc, _F13, out_fmt, mode, counter, "act.out")


def act_eval_raw_array(
    kind: ActivationKind,
    x_raw: np.ndarray,
    x_frac: int,
    out_fmt: FxpFormat,
    mode: RoundingMode = RoundingMode.NEAREST_TIES_AWAY,
    counter: OverflowCounter | None = None,
) -> np.ndarray:
    """Vectorized :func:`act_eval_raw` over an int64 array of raws."""
    poly = _poly_for(kind)
    x13 = requant_raw_array(x_raw, x_frac, INTERNAL_FMT, mode, counter, "act.in")
    coeffs = poly.quantized_coeffs(mode)
    n_seg = len(poly.segments)
    idx = np.full(x13.shape, n_seg - 1, dtype=np.int64)
    for i in range(n_seg - 2, -1, -1):
        idx = np.where(x13 <= poly.upper_raw[i], i, idx)
    a2 = np.array([c[0] for c in coeffs], dtype=np.int64)[idx]
    a1 = np.array([c[1] for c in coeffs], dtype=np.int64)[idx]
    a0 = np.array([c[2] for c in coeffs], dtype=np.int64)[idx]
    tail = (a2 == 0) & (a1 == 0)
    # Zero the tail lanes so their dead multiplies cannot trip the counter.
    xs = np.where(tail, 0, x13)
    x2 = requant_raw_array(xs * xs, 2 * _F13, INTERNAL_FMT, mode, counter, "act.mul")
    t2 = requant_raw_array(a2 * x2, 2 * _F13, INTERNAL_FMT, mode, counter, "act.mul")
    t1 = requant_raw_array(a1 * xs, 2 * _F13, INTERNAL_FMT, mode, counter, "act.mul")
    acc = np.where(tail, a0, t2 + t1 + a0)
    return requant_raw_array(acc, _F13, out_fmt, mode, counter, "act.out")


def act_eval(
    kind: ActivationKind,
    x: FxpValue,
    out_fmt: FxpFormat,
    mode: RoundingMode = RoundingMode.NEAREST_TIES_AWAY,
    counter: OverflowCounter | None = None,
) -> FxpValue:
    """Fixed-point activation of an FxpValue into ``out_fmt``."""
    raw = act_eval_raw(kind, x.raw, x.fmt.frac_bits, out_fmt, mode, counter)
    return FxpValue(raw, out_fmt)


def act_eval_real(kind: ActivationKind, x: float) -> float:
    """Real-coefficient piecewise evaluation (full-precision network path)."""
    return _poly_for(kind).eval_real(x)


def act_eval_real_array(kind: ActivationKind, x: np.ndarray) -> np.ndarray:
    """Vectorized :func:`act_eval_real`."""
    poly = _poly_for(kind)
    x = np.asarray(x, dtype=np.float64)
    n_seg = len(poly.segments)
    idx = np.full(x.shape, n_seg - 1, dtype=np.int64)
    for i in range(n_seg - 2, -1, -1):
        idx = np.where(x <= poly.segments[i].upper, i, idx)
    a2 = np.array([s.a2 for s in poly.segments])[idx]
    a1 = np.array([s.a1 for s in poly.segments])[idx]
    a0 = np.array([s.a0 for s in poly.segments])[idx]
    return (a2 * x + a1) * x + a0


def relu(x: FxpValue) -> FxpValue:
    """x if positive else zero, same format."""
    return x if x.raw > 0 else FxpValue(0, x.fmt)


def reference_activation(kind: ActivationKind, x: float) -> float:
    """Exact sigmoid/tanh/relu oracle via host transcendentals."""
    if not math.isfinite(x):
        raise ValueError(f"non-finite input {x!r}")
    if kind is ActivationKind.SIGMOID:
        return 1.0 / (1.0 + math.exp(-x))
    if kind is ActivationKind.TANH:
        return math.tanh(x)
    return x if x > 0.0 else 0.0


def measure_approx_error(
    kind: ActivationKind, grid_step: float, lo: float, hi: float
) -> tuple[float, float]:
    """Max |piecewise(real coeffs) - reference| over a uniform grid.

    Returns (max_abs_error, argmax).  The grid is lo + k*grid_step, which
    in floating point lands next to (not exactly on) the integer segment
    breakpoints for the usual decimal steps.
    """
    if not (lo < hi and grid_step > 0.0):
        raise ValueError("need lo < hi and grid_step > 0")
    n = int(math.floor((hi - lo) / grid_step)) + 1
    xs = lo + np.arange(n, dtype=np.float64) * grid_step
    approx = act_eval_real_array(kind, xs)
    if kind is ActivationKind.SIGMOID:
        ref = 1.0 / (1.0 + np.exp(-xs))
    elif kind is ActivationKind.TANH:
        ref = np.tanh(xs)
    else:
        ref = np.maximum(xs, 0.0)
    err = np.abs(approx - ref)
    k = int(np.argmax(err))
    return float(err[k]), float(xs[k])
