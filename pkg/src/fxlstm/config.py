"""Bit-width configurations: one parameter format paired with one
operation format.

The seven numbered presets are the selected hardware configurations;
the default exploration grid widens them with the formats that were
examined and rejected for having too few integer bits (operations) or
too few fraction bits (parameters).
"""

from __future__ import annotations

from dataclasses import dataclass

from .fxp import FxpFormat, RoundingMode, parse_format

__all__ = ["BitWidthConfig", "PRESETS", "DEFAULT_PARAM_FMTS", "DEFAULT_OP_FMTS"]


@dataclass(frozen=True)
class BitWidthConfig:
    """One point of the design space."""

    param_fmt: FxpFormat
    op_fmt: FxpFormat
    name: str = ""
    mode: RoundingMode = RoundingMode.NEAREST_TIES_AWAY

    @property
    def storage_bits_per_param(self) -> int:
        return self.param_fmt.total_bits

    def __str__(self) -> str:
        tag = f"{self.name}: " if self.name else ""
        return f"{tag}{self.param_fmt}/{self.op_fmt}"


def _preset(num: int, p: str, o: str) -> BitWidthConfig:
    return BitWidthConfig(parse_format(p), parse_format(o), name=f"#{num}")


PRESETS: dict[int, BitWidthConfig] = {
    1: _preset(1, "FxP(10,8)", "FxP(13,8)"),
    2: _preset(2, "FxP(10,8)", "FxP(13,9)"),
    3: _preset(3, "FxP(10,8)", "FxP(12,8)"),
    4: _preset(4, "FxP(9,7)", "FxP(13,8)"),
    5: _preset(5, "FxP(9,7)", "FxP(13,9)"),
    6: _preset(6, "FxP(9,7)", "FxP(12,8)"),
    7: _preset(7, "FxP(8,6)", "FxP(13,9)"),
}

DEFAULT_PARAM_FMTS = [
    FxpFormat(10, 8),
    FxpFormat(9, 7),
    FxpFormat(8, 6),
    FxpFormat(8, 4),
]

DEFAULT_OP_FMTS = [
    FxpFormat(13, 8),
    FxpFormat(13, 9),
    FxpFormat(12, 8),
    FxpFormat(13, 10),
    FxpFormat(12, 9),
    FxpFormat(11, 8),
]
