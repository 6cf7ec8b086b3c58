"""Discretized Ziv-Zakai bound: objective, analytic gradient and diagonal Hessian."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special

from .snr import SnrValue, as_linear_snr
from .spectrum import AcfVector

__all__ = [
    "SnrValue",
    "ZzbEval",
    "q_function",
    "zzb_objective",
    "zzb_gradient",
    "zzb_hessian_diag",
    "zzb_evaluate",
    "zzb_curve",
    "U_FLOOR",
]

# Floor on SNR (1 - r) / 2; keeps the (1 - r)^(-1/2) factor finite at r = 1.
U_FLOOR = 1e-12

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class ZzbEval:
    value: float
    gradient: NDArray[np.float64]
    hessian_diag: NDArray[np.float64]


def q_function(z: ArrayLike) -> NDArray[np.float64] | float:
    """Standard normal tail probability ``Q(z) = P(N(0, 1) > z)``."""
    out = special.ndtr(-np.asarray(z, dtype=np.float64))
    return float(out) if np.ndim(out) == 0 else out


def _half_arg(r: NDArray[np.float64], s: float) -> NDArray[np.float64]:
    # u = SNR (1 - r) / 2, with r clamped to <= 1
    return 0.5 * s * (1.0 - np.minimum(r, 1.0))


def zzb_objective(r: AcfVector, snr: SnrValue | float) -> float:
    """
    Riemann-weighted ZZB, ``dx * sum_i x_i Q(sqrt(SNR (1 - r_i) / 2))``.

    Values of ``r`` above one are clamped to one before evaluation.
    """
    s = as_linear_snr(snr)
    grid = r.grid
    u = _half_arg(r.r, s)
    return float(grid.dx * np.dot(grid.points, special.ndtr(-np.sqrt(u))))


def _grad_hess(r: AcfVector, s: float, hessian: bool):
    grid = r.grid
    x = grid.points
    u = np.maximum(_half_arg(r.r, s), U_FLOOR)
    z = np.sqrt(u)
    phi = _INV_SQRT_2PI * np.exp(-0.5 * u)
    w = grid.dx * x
    # d/dr Q(z(r)) = phi(z) * SNR / (4 z)
    g = w * (0.25 * s) * phi / z
    g[0] = 0.0
    if not hessian:
        return g, None
    # d2/dr2 Q(z(r)) = phi(z) * SNR^2 / 16 * (1/z + 1/z^3)
    h = w * (s * s / 16.0) * phi * (1.0 / z + 1.0 / (u * z))
    h[0] = 0.0
    return g, h


def zzb_gradient(r: AcfVector, snr: SnrValue | float) -> NDArray[np.float64]:
    """Gradient of :func:`zzb_objective`; the pinned first coordinate gets 0."""
    return _grad_hess(r, as_linear_snr(snr), hessian=False)[0]


def zzb_hessian_diag(r: AcfVector, snr: SnrValue | float) -> NDArray[np.float64]:
    """Diagonal of the (diagonal) Hessian of :func:`zzb_objective`."""
    return _grad_hess(r, as_linear_snr(snr), hessian=True)[1]


def zzb_evaluate(r: AcfVector, snr: SnrValue | float) -> ZzbEval:
    s = as_linear_snr(snr)
    g, h = _grad_hess(r, s, hessian=True)
    return ZzbEval(zzb_objective(r, s), g, h)


def zzb_curve(r: AcfVector, snrs: Iterable[SnrValue | float]) -> list[float]:
    """ZZB of a fixed waveform at each SNR in ``snrs``."""
    snrs = list(snrs)
    if not snrs:
        raise ValueError("need at least one SNR")
    return [zzb_objective(r, s) for s in snrs]
