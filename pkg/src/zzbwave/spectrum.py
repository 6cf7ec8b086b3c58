"""Lag grid, DCT-IV transform pair, reference waveforms and spectral statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import fft

from .snr import as_linear_snr

__all__ = [
    "Grid",
    "AcfVector",
    "Spectrum",
    "SpectralStats",
    "DegenerateSpectrumError",
    "dct_matrix",
    "dct4",
    "idct4",
    "dct_forward",
    "dct_inverse",
    "make_sinc_acf",
    "make_single_tone_acf",
    "rms_bandwidth",
    "crb",
]


class DegenerateSpectrumError(ValueError):
    """Raised when a spectrum carries no power (or zero RMS bandwidth)."""


@dataclass(frozen=True)
class Grid:
    """
    Uniform lag grid on ``[0, eps_max]``.

    Distances are in units where the propagation speed is 1, so lags and
    ranging errors share the same axis.

    Parameters
    ----------
    n
        Number of samples.
    eps_max
        Maximum ranging error (grid length).
    """

    n: int
    eps_max: float

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"grid needs n >= 2 samples, got {self.n}")
        if not np.isfinite(self.eps_max) or self.eps_max <= 0:
            raise ValueError(f"eps_max must be positive, got {self.eps_max}")

    @property
    def dx(self) -> float:
        """Lag spacing."""
        return self.eps_max / (self.n - 1)

    @property
    def points(self) -> NDArray[np.float64]:
        """Sample lags ``x_i``; first is 0 and last is ``eps_max`` exactly."""
        return np.linspace(0.0, self.eps_max, self.n)

    def freq_of_index(self, k: ArrayLike) -> NDArray[np.float64]:
        """Frequency (cycles per distance unit) of 1-based DCT-IV index ``k``."""
        k = np.asarray(k, dtype=np.float64)
        return (2.0 * k - 1.0) / (4.0 * self.n * self.dx)

    @property
    def frequencies(self) -> NDArray[np.float64]:
        return self.freq_of_index(np.arange(1, self.n + 1))


@dataclass(frozen=True, eq=False)
class AcfVector:
    """Sampled normalized autocorrelation ``r`` on a grid."""

    grid: Grid
    r: NDArray[np.float64]

    def __post_init__(self) -> None:
        r = np.asarray(self.r, dtype=np.float64)
        if r.shape != (self.grid.n,):
            raise ValueError(f"r has shape {r.shape}, grid expects ({self.grid.n},)")
        r.setflags(write=False)
        object.__setattr__(self, "r", r)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """DCT-IV coefficients (discrete PSD) of an ACF with its band-limit index."""

    grid: Grid
    coeffs: NDArray[np.float64]
    b_dis: int

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.shape != (self.grid.n,):
            raise ValueError(f"coeffs has shape {c.shape}, grid expects ({self.grid.n},)")
        if not 1 <= self.b_dis <= self.grid.n:
            raise ValueError(f"b_dis must lie in [1, {self.grid.n}], got {self.b_dis}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def frequencies(self) -> NDArray[np.float64]:
        return self.grid.frequencies

    @property
    def band_edge(self) -> float:
        """Frequency of the last in-band index ``b_dis``."""
        return float(self.grid.freq_of_index(self.b_dis))


@dataclass(frozen=True)
class SpectralStats:
    rms_bandwidth: float
    total_power: float
    mean_frequency: float


def dct_matrix(n: int) -> NDArray[np.float64]:
    """Dense orthonormal DCT-IV matrix, ``C[k, m] = sqrt(2/n) cos(pi (2k+1)(2m+1) / 4n)``."""
    idx = 2.0 * np.arange(n) + 1.0
    return np.sqrt(2.0 / n) * np.cos(np.pi / (4.0 * n) * np.outer(idx, idx))


def dct4(x: ArrayLike) -> NDArray[np.float64]:
    """Orthonormal DCT-IV along the last axis (fast path of ``dct_matrix(n) @ x``)."""
    return fft.dct(np.asarray(x, dtype=np.float64), type=4, norm="ortho", axis=-1)


def idct4(p: ArrayLike) -> NDArray[np.float64]:
    # DCT-IV is symmetric and orthogonal: it is its own inverse.
    return fft.dct(np.asarray(p, dtype=np.float64), type=4, norm="ortho", axis=-1)


def dct_forward(r: AcfVector, b_dis: int | None = None) -> Spectrum:
    """Transform an ACF to its discrete PSD ``p = C r``."""
    n = r.grid.n
    return Spectrum(r.grid, dct4(r.r), n if b_dis is None else b_dis)


def dct_inverse(p: Spectrum) -> AcfVector:
    """Recover the ACF samples ``r = C^T p``."""
    return AcfVector(p.grid, idct4(p.coeffs))


def _check_band(grid: Grid, b_dis: int) -> None:
    if int(b_dis) != b_dis or not 1 <= b_dis <= grid.n:
        raise ValueError(f"b_dis must be an integer in [1, {grid.n}], got {b_dis}")


def make_sinc_acf(grid: Grid, b_dis: int) -> AcfVector:
    """
    ACF with a flat spectrum on indices ``1..b_dis`` and nothing above.

    The flat level is chosen so that the zero-lag sample is exactly one.
    """
    _check_band(grid, b_dis)
    p = np.zeros(grid.n)
    p[:b_dis] = 1.0
    r = idct4(p)
    r = r / r[0]
    r[0] = 1.0
    return AcfVector(grid, r)


def make_single_tone_acf(grid: Grid, b_dis: int) -> AcfVector:
    """
    ACF of a pure tone at the band edge (the RMS-bandwidth maximizer).

    Rescaled so the zero-lag sample is one. Because DCT-IV columns are
    sampled half a bin off zero lag, later samples can slightly exceed one.
    """
    _check_band(grid, b_dis)
    p = np.zeros(grid.n)
    p[b_dis - 1] = 1.0
    r = idct4(p)
    r = r / r[0]
    r[0] = 1.0
    return AcfVector(grid, r)


def rms_bandwidth(p: Spectrum) -> SpectralStats:
    """
    RMS bandwidth, total power and mean frequency of a discrete PSD.

    Raises
    ------
    DegenerateSpectrumError
        If the spectrum has no positive total power.
    """
    c = p.coeffs
    total = float(c.sum())
    if not total > 0.0:
        raise DegenerateSpectrumError("spectrum has no power")
    f = p.frequencies
    mean_f = float(np.dot(f, c) / total)
    beta2 = float(np.dot(f * f, c) / total)
    return SpectralStats(float(np.sqrt(max(beta2, 0.0))), total, mean_f)


def crb(p: Spectrum, snr) -> float:
    """Cramer-Rao bound ``1 / (8 pi^2 beta^2 SNR)`` on distance MSE (c = 1)."""
    s = as_linear_snr(snr)
    if not s > 0:
        raise ValueError(f"snr must be positive, got {s}")
    beta = rms_bandwidth(p).rms_bandwidth
    if beta <= 0.0:
        raise DegenerateSpectrumError("zero RMS bandwidth")
    return 1.0 / (8.0 * np.pi**2 * beta**2 * s)
