"""Signal-to-noise ratio value type (linear internally, dB at the edges)."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class SnrValue:
    """Energy-to-noise ratio ``E / N0`` as a linear power ratio."""

    linear: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.linear) and self.linear > 0):
            raise ValueError(f"SNR must be a positive finite ratio, got {self.linear}")

    @classmethod
    def from_db(cls, db: float) -> "SnrValue":
        return cls(10.0 ** (db / 10.0))

    @property
    def db(self) -> float:
        return 10.0 * math.log10(self.linear)


def as_linear_snr(snr: "SnrValue | float") -> float:
    """Accept an :class:`SnrValue` or a bare linear ratio."""
    if isinstance(snr, SnrValue):
        return snr.linear
    return SnrValue(float(snr)).linear
