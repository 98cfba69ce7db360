"""Saturating two's-complement fixed-point arithmetic.

A format FxP(b, f) has b total bits (one of them the sign), f fraction
bits, and b - f - 1 integer bits.  Values are stored as signed integers
("raw") scaled by 2**-f.  Quantization of a real x is magnitude scaling,
offset by a rounding bias, integer truncation, rescale, then a clamp to
the representable range:

    y     = sign(x) * floor((|x| + eps) / 2**-f) * 2**-f
    x_fxp = clamp(y, Min, Max)

with Min = -2**(b-1) * 2**-f and Max = (2**(b-1) - 1) * 2**-f.

Two rounding biases are supported: eps = 2**-(f+1) (round to nearest,
ties away from zero; the default) and eps = 2**-f (a compatibility mode
that rounds magnitudes up, shifting exactly representable values one ULP
outward).

The datapath contract built on top of this: multiplications are rounded
and saturated into a fixed output format, additions are exact and
unbounded (wide accumulator), and a single requantization brings an
accumulator back into a storage format.  Requantization is pure integer
arithmetic (shift + offset + clamp) and agrees bit-for-bit with
quantizing the accumulator's exact real value.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "FxpFormat",
    "FxpValue",
    "WideAccumulator",
    "RoundingMode",
    "OverflowCounter",
    "quantize",
    "quantize_array",
    "format_range",
    "fxp_mul",
    "wide_add",
    "wide_zero",
    "requantize",
    "requant_raw",
    "requant_raw_array",
    "encode_bits",
    "decode_bits",
    "parse_format",
]


class RoundingMode(Enum):
    """Rounding bias used during quantization."""

    NEAREST_TIES_AWAY = "nearest"   # eps = 2**-(f+1)
    PAPER_EPSILON = "paper"         # eps = 2**-f


@dataclass(frozen=True)
class FxpFormat:
    """A signed fixed-point format with ``total_bits`` and ``frac_bits``."""

    total_bits: int
    frac_bits: int

    def __post_init__(self):
        if not (2 <= self.total_bits <= 32):
            raise ValueError(f"total_bits must be in [2, 32], got {self.total_bits}")
        if not (0 <= self.frac_bits <= self.total_bits - 1):
            raise ValueError(
                f"frac_bits must satisfy 0 <= f <= b-1, got FxP({self.total_bits},{self.frac_bits})"
            )

    @property
    def int_bits(self) -> int:
        """Integer bits excluding the sign bit."""
        return self.total_bits - self.frac_bits - 1

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    @property
    def ulp(self) -> float:
        return 1.0 / self.scale

    @property
    def max_raw(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def min_raw(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def max_value(self) -> float:
        return self.max_raw / self.scale

    @property
    def min_value(self) -> float:
        return self.min_raw / self.scale

    def __str__(self) -> str:
        return f"FxP({self.total_bits},{self.frac_bits})"


_FORMAT_RE = re.compile(r"^\s*FxP\(\s*(\d+)\s*,\s*(\d+)\s*\)\s*$")


def parse_format(text: str) -> FxpFormat:
    """Parse a format string like ``"FxP(13,9)"``."""
    m = _FORMAT_RE.match(text)
    if not m:
        raise ValueError(f"not a fixed-point format string: {text!r}")
    return FxpFormat(int(m.group(1)), int(m.group(2)))


def format_range(fmt: FxpFormat) -> tuple[float, float]:
    """(Min, Max) representable real values of ``fmt``."""
    return (fmt.min_value, fmt.max_value)


@dataclass(frozen=True)
class FxpValue:
    """A raw two's-complement integer together with its format."""

    raw: int
    fmt: FxpFormat

    def __post_init__(self):
        if not (self.fmt.min_raw <= self.raw <= self.fmt.max_raw):
            raise ValueError(f"raw {self.raw} outside {self.fmt} range")

    @property
    def value(self) -> float:
        """Exact real value raw * 2**-f (exact in double for b <= 32)."""
        return self.raw / self.fmt.scale

    def __str__(self) -> str:
        return f"{self.value!r}:{self.fmt}"


@dataclass(frozen=True)
class WideAccumulator:
    """Unbounded exact accumulator at a fixed fraction position.

    Addition never rounds and never saturates; Python integers make the
    no-overflow guarantee unconditional.
    """

    raw: int
    frac_bits: int

    @property
    def value(self) -> float:
        return self.raw / (1 << self.frac_bits)


@dataclass
class OverflowCounter:
    """Per-site saturation event counter.

    Saturation is silent in values; call sites that care pass one of
    these and read back how often the clamp actually engaged.
    """

    counts: dict[str, int] = field(default_factory=dict)

    def add(self, site: str, n: int = 1) -> None:
        if n:
            self.counts[site] = self.counts.get(site, 0) + n

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def _round_mag(mag_scaled: float, mode: RoundingMode) -> int:
    # mag_scaled = |x| * 2**f as a float; bias then truncate.
    if mode is RoundingMode.NEAREST_TIES_AWAY:
        return math.floor(mag_scaled + 0.5)
    return math.floor(mag_scaled + 1.0)


def quantize(
    x: float,
    fmt: FxpFormat,
    mode: RoundingMode = RoundingMode.NEAREST_TIES_AWAY,
    counter: OverflowCounter | None = None,
    site: str = "quantize",
) -> FxpValue:
    """Quantize a finite real into ``fmt``, saturating at the range ends."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot quantize non-finite value {x!r}")
    if x == 0.0:
        return FxpValue(0, fmt)
    sign = 1 if x > 0.0 else -1
    mag_scaled = abs(x) * fmt.scale
    # Anything at or beyond max_raw + 2 saturates regardless of the bias;
    # capping here keeps the addition below exact-integer float territory.
    mag_scaled = min(mag_scaled, float(fmt.max_raw + 2))
    raw = sign * _round_mag(mag_scaled, mode)
    if raw > fmt.max_raw:
        raw = fmt.max_raw
        if counter is not None:
            counter.add(site)
    elif raw < fmt.min_raw:
        raw = fmt.min_raw
        if counter is not None:
            counter.add(site)
    return FxpValue(raw, fmt)


def quantize_array(
    x: np.ndarray,
    fmt: FxpFormat,
    mode: RoundingMode = RoundingMode.NEAREST_TIES_AWAY,
    counter: OverflowCounter | None = None,
    site: str = "quantize",
) -> np.ndarray:
    """Vectorized :func:`quantize`; returns int64 raws, same shape as x."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot quantize non-finite values")
    bias = 0.5 if mode is RoundingMode.NEAREST_TIES_AWAY else 1.0
    mag = np.minimum(np.abs(x) * fmt.scale, float(fmt.max_raw + 2))
    raw = np.sign(x).astype(np.int64) * np.floor(mag + bias).astype(np.int64)
    clipped = np.clip(raw, fmt.min_raw, fmt.max_raw)
    if counter is not None:
        counter.add(site, int(np.count_nonzero(raw != clipped)))
    return clipped


def requant_raw(
    raw: int,
    src_frac: int,
    fmt: FxpFormat,
    mode: RoundingMode = RoundingMode.NEAREST_TIES_AWAY,
    counter: OverflowCounter | None = None,
    site: str = "requant",
) -> int:
    """Integer-only requantization of ``raw`` at ``src_frac`` into ``fmt``.

    Bit-exactly equal to quantize(raw * 2**-src_frac, fmt, mode).
    """
    if raw == 0:
        return 0
    sign = 1 if raw > 0 else -1
    mag = raw if raw > 0 else -raw
    shift = src_frac - fmt.frac_bits
    if mode is RoundingMode.NEAREST_TIES_AWAY:
        if shift > 0:
            mag = (mag + (1 << (shift - 1))) >> shift
        elif shift < 0:
            mag = mag << (-shift)
        # shift == 0: floor(mag + 0.5) == mag
    else:
        if shift > 0:
            mag = (mag >> shift) + 1
        elif shift < 0:
            mag = (mag << (-shift)) + 1
        else:
            mag = mag + 1
    out = sign * mag
    if out > fmt.max_raw:
        out = fmt.max_raw
        if counter is not None:
            counter.add(site)
    elif out < fmt.min_raw:
        out = fmt.min_raw
        if counter is not None:
            counter.add(site)
    return out


def requant_raw_array(
    raw: np.ndarray,
    src_frac: int,
    fmt: FxpFormat,
    mode: RoundingMode = RoundingMode.NEAREST_TIES_AWAY,
    counter: OverflowCounter | None = None,
    site: str = "requant",
) -> np.ndarray:
    """Vectorized :func:`requant_raw` on int64 raws.

    Caller must keep |raw| plus the rounding offset inside int64; with the
    supported formats (<= 32 bits) and <= 64 addends that always holds.
    """
    raw = np.asarray(raw, dtype=np.int64)
    sign = np.sign(raw)
    mag = np.abs(raw)
    shift = src_frac - fmt.frac_bits
    if mode is RoundingMode.NEAREST_TIES_AWAY:
        if shift > 0:
            mag = (mag + (1 << (shift - 1))) >> shift
        elif shift < 0:
            mag = mag << (-shift)
    else:
        if shift > 0:
            mag = (mag >> shift) + 1
        elif shift < 0:
            mag = (mag << (-shift)) + 1
        else:
            mag = mag + 1
        mag = np.where(sign == 0, 0, mag)
    out = sign * mag
    clipped = np.clip(out, fmt.min_raw, fmt.max_raw)
    if counter is not None:
        counter.add(site, int(np.count_nonzero(out != clipped)))
    return clipped


def fxp_mul(
    a: FxpValue,
    b: FxpValue,
    out_fmt: FxpFormat,
    mode: RoundingMode = RoundingMode.NEAREST_TIES_AWAY,
    counter: OverflowCounter | None = None,
    site: str = "mul",
) -> FxpValue:
    """Exact integer product rounded and saturated into ``out_fmt``."""
    prod = a.raw * b.raw
    prod_frac = a.fmt.frac_bits + b.fmt.frac_bits
    return FxpValue(requant_raw(prod, prod_frac, out_fmt, mode, counter, site), out_fmt)


def wide_zero(frac_bits: int) -> WideAccumulator:
    return WideAccumulator(0, frac_bits)


def wide_add(acc: WideAccumulator, v: FxpValue) -> WideAccumulator:
    """Exact addition; the operand's fraction must already be aligned."""
    if v.fmt.frac_bits != acc.frac_bits:
        raise ValueError(
            f"fraction mismatch: accumulator at f={acc.frac_bits}, "
            f"operand at f={v.fmt.frac_bits} (align with an exact shift first)"
        )
    return WideAccumulator(acc.raw + v.raw, acc.frac_bits)


def requantize(
    acc: WideAccumulator,
    out_fmt: FxpFormat,
    mode: RoundingMode = RoundingMode.NEAREST_TIES_AWAY,
    counter: OverflowCounter | None = None,
    site: str = "requant",
) -> FxpValue:
    """Round and saturate an accumulator into ``out_fmt``."""
    return FxpValue(
        requant_raw(acc.raw, acc.frac_bits, out_fmt, mode, counter, site), out_fmt
    )


def encode_bits(v: FxpValue) -> str:
    """Two's-complement bit-string of length b, MSB (sign) first."""
    b = v.fmt.total_bits
    return format(v.raw & ((1 << b) - 1), f"0{b}b")


def decode_bits(bits: str, fmt: FxpFormat) -> FxpValue:
    """Inverse of :func:`encode_bits`."""
    if len(bits) != fmt.total_bits or any(c not in "01" for c in bits):
        raise ValueError(
            f"expected {fmt.total_bits} binary digits for {fmt}, got {bits!r}"
        )
    raw = int(bits, 2)
    if raw > fmt.max_raw:
        raw -= 1 << fmt.total_bits
    return FxpValue(raw, fmt)
