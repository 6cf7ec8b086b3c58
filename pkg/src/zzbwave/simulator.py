"""Monte Carlo ranging with the matched-filter (correlator argmax) estimator.

The correlator output at lag ``x_j`` for true distance ``d`` is

    z_j = R(|x_j - d|) + nu_j,   Cov(nu_j, nu_k) = R(|x_j - x_k|) / SNR,

which is the unique scaling under which the binary decision between two
candidate delays errs with probability ``Q(sqrt(SNR (1 - R) / 2))``, the
kernel inside the ZZB.

Two channel ACF models are available:

``"spectral"`` (default)
    ``R`` is the ACF of the waveform's nonnegative discrete PSD,
    ``sum_k w_k cos(2 pi f_k x) / sum_k w_k``. It is a valid (positive
    semi-definite) ACF for every feasible design.
``"grid"``
    ``R`` is the DCT-IV expansion itself, which equals ``r`` at grid lags
    (see :func:`evaluate_acf_at`). Its basis sits half a sample off zero lag,
    so ``Toeplitz(r)`` is indefinite for most optimized designs and the
    Cholesky factorization then fails with :class:`CovarianceError`.

Every trial draws from its own counter-based stream keyed by ``(seed,
trial)``. Trials are processed in fixed blocks, so results do not depend on
how blocks are spread over workers, and the same standard-normal draws are
reused at every SNR (common random numbers across an SNR sweep and across
waveforms).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg
from scipy.linalg import lapack

from .snr import SnrValue, as_linear_snr
from .spectrum import AcfVector, Grid, dct4

__all__ = [
    "CovarianceError",
    "SimConfig",
    "SimResult",
    "CdfTable",
    "acf_expansion",
    "channel_acf",
    "evaluate_acf_at",
    "synth_noise",
    "noise_factor",
    "estimate_delay",
    "monte_carlo_mse",
    "monte_carlo_sweep",
    "error_cdf_report",
    "dkw_epsilon",
    "uniform_guess_cdf",
]

log = logging.getLogger(__name__)

JITTER = 1e-10
BLOCK_SIZE = 250
NOISE_METHODS = ("exact_cholesky", "spectral_approx")
ACF_MODELS = ("spectral", "grid")


class CovarianceError(np.linalg.LinAlgError):
    """Toeplitz noise covariance is not positive definite even after jitter."""

    def __init__(self, minor: int) -> None:
        super().__init__(f"noise covariance not positive definite: leading minor {minor} fails")
        self.minor = minor


@dataclass(frozen=True)
class SimConfig:
    """
    Parameters
    ----------
    snr
        Operating SNR.
    trials
        Number of Monte Carlo trials.
    seed
        Master seed (unsigned 64-bit).
    noise_method
        ``"exact_cholesky"`` (default) or ``"spectral_approx"``.
    prior_max
        Upper end of the uniform prior on the true distance; defaults to the
        grid's ``eps_max``.
    workers
        Process count for block fan-out; results do not depend on it.
    acf_model
        Channel ACF model, ``"spectral"`` or ``"grid"`` (see module notes).
    """

    snr: SnrValue
    trials: int
    seed: int = 0
    noise_method: str = "exact_cholesky"
    prior_max: float | None = None
    workers: int = 1
    acf_model: str = "spectral"

    def __post_init__(self) -> None:
        if not isinstance(self.snr, SnrValue):
            object.__setattr__(self, "snr", SnrValue(float(self.snr)))
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError(f"trials must be a positive integer, got {self.trials}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.noise_method not in NOISE_METHODS:
            raise ValueError(f"noise_method must be one of {NOISE_METHODS}")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        if self.acf_model not in ACF_MODELS:
            raise ValueError(f"acf_model must be one of {ACF_MODELS}")


@dataclass(frozen=True, eq=False)
class SimResult:
    snr: SnrValue
    trials: int
    seed: int
    mse: float
    mse_ci95: tuple[float, float]
    abs_errors: NDArray[np.float64] = field(repr=False)

    @property
    def ci_half_width(self) -> float:
        return 0.5 * (self.mse_ci95[1] - self.mse_ci95[0])

    @property
    def cdf(self) -> list[tuple[float, float]]:
        """Empirical CDF of the absolute error as ``(error, cumulative probability)``."""
        e = np.sort(self.abs_errors)
        p = np.arange(1, e.size + 1) / e.size
        return list(zip(e.tolist(), p.tolist()))

    def cdf_at(self, errors: ArrayLike) -> NDArray[np.float64]:
        e = np.sort(self.abs_errors)
        return np.searchsorted(e, np.asarray(errors, dtype=np.float64), side="right") / e.size


@dataclass(frozen=True)
class _Expansion:
    """Finite cosine expansion ``R(x) = sum_k weight_k cos(omega_k (x + shift))``."""

    omega: NDArray[np.float64]
    weight: NDArray[np.float64]
    shift: float

    def __call__(self, lag: ArrayLike) -> NDArray[np.float64]:
        lag = np.asarray(lag, dtype=np.float64)
        return np.cos(np.multiply.outer(lag + self.shift, self.omega)) @ self.weight


def acf_expansion(r: AcfVector, model: str = "grid", rel_tol: float = 1e-13) -> _Expansion:
    """
    Cosine expansion of the channel ACF implied by ``r``.

    ``"grid"`` reproduces ``r`` at grid lags; ``"spectral"`` is the
    phase-aligned ACF of the same PSD, normalized to one at zero lag.
    """
    if model not in ACF_MODELS:
        raise ValueError(f"acf model must be one of {ACF_MODELS}")
    grid = r.grid
    p = dct4(r.r)
    keep = np.abs(p) > rel_tol * np.max(np.abs(p))
    k = np.flatnonzero(keep) + 1
    omega = 2.0 * np.pi * grid.freq_of_index(k)
    weight = np.sqrt(2.0 / grid.n) * p[keep]
    if model == "grid":
        return _Expansion(omega, weight, 0.5 * grid.dx)
    w = np.clip(weight, 0.0, None)
    total = w.sum()
    if not total > 0.0:
        raise ValueError("waveform has no nonnegative spectral power")
    return _Expansion(omega, w / total, 0.0)


def channel_acf(r: AcfVector, lag: ArrayLike, model: str = "spectral") -> NDArray[np.float64] | float:
    """Channel ACF of ``r`` under ``model`` at arbitrary nonnegative lags."""
    out = acf_expansion(r, model)(np.abs(np.asarray(lag, dtype=np.float64)))
    return float(out) if out.ndim == 0 else out


def evaluate_acf_at(r: AcfVector, lag: ArrayLike) -> NDArray[np.float64] | float:
    """
    Evaluate the ACF off-grid through its DCT-IV cosine expansion.

    DCT-IV basis functions sit half a sample off the lag grid, so the
    expansion is ``sum_k w_k cos(2 pi f_k (lag + dx/2))``; it reproduces
    ``r`` exactly at grid lags.

    Raises
    ------
    ValueError
        If any lag falls outside ``[0, eps_max]``.
    """
    lag_arr = np.asarray(lag, dtype=np.float64)
    eps = r.grid.eps_max
    if np.any(lag_arr < 0.0) or np.any(lag_arr > eps * (1 + 1e-12)):
        raise ValueError(f"lag outside [0, {eps}]")
    out = acf_expansion(r, "grid")(lag_arr)
    return float(out) if out.ndim == 0 else out


def _mean_block(r: AcfVector, ex: _Expansion, d: NDArray[np.float64]) -> NDArray[np.float64]:
    # R(|x - d|) for all grid x and a batch of d, as (n, batch); split by the
    # sign of x - d so the cosine separates into matrix products.
    x = r.grid.points
    h = ex.shift
    cd = np.cos(np.multiply.outer(ex.omega, d)) * ex.weight[:, None]
    sd = np.sin(np.multiply.outer(ex.omega, d)) * ex.weight[:, None]
    # x >= d: cos(w (x - d + h)) = cos(w (x + h)) cos(w d) + sin(w (x + h)) sin(w d)
    up = np.cos(np.outer(x + h, ex.omega)) @ cd + np.sin(np.outer(x + h, ex.omega)) @ sd
    # x < d:  cos(w (d - x + h)) = cos(w (h - x)) cos(w d) - sin(w (h - x)) sin(w d)
    dn = np.cos(np.outer(h - x, ex.omega)) @ cd - np.sin(np.outer(h - x, ex.omega)) @ sd
    return np.where(x[:, None] >= d[None, :], up, dn)


def noise_factor(r: AcfVector, method: str = "exact_cholesky", model: str = "spectral") -> NDArray[np.float64]:
    """
    Matrix ``L`` such that ``L @ w / sqrt(SNR)`` has the noise covariance for
    standard-normal ``w``.

    ``exact_cholesky`` returns the lower Cholesky factor (n x n) of the
    Toeplitz matrix of the channel ACF at grid lags plus ``1e-10 I``; under
    the ``"grid"`` model that Toeplitz matrix is ``Toeplitz(r)``.
    ``spectral_approx`` returns an ``n x 2K`` cosine/sine synthesis matrix
    whose covariance is the phase-aligned cosine sum of the PSD: exact under
    the ``"spectral"`` model, an approximation under ``"grid"``.

    Raises
    ------
    CovarianceError
        If the Cholesky factorization fails; carries the failing minor.
    """
    if method == "exact_cholesky":
        col = r.r if model == "grid" else acf_expansion(r, model)(r.grid.points)
        cov = linalg.toeplitz(col) + JITTER * np.eye(r.grid.n)
        c, info = lapack.dpotrf(cov, lower=1, clean=1)
        if info > 0:
            raise CovarianceError(int(info))
        if info < 0:
            raise ValueError(f"dpotrf argument {-info} invalid")
        return c
    if method == "spectral_approx":
        ex = acf_expansion(r, "spectral")
        arg = np.outer(r.grid.points, ex.omega)
        sq = np.sqrt(ex.weight)
        return np.hstack([np.cos(arg) * sq, np.sin(arg) * sq])
    raise ValueError(f"unknown noise method {method!r}")


def synth_noise(
    r: AcfVector,
    snr: SnrValue | float,
    rng: np.random.Generator,
    method: str = "exact_cholesky",
    model: str = "spectral",
    size: int | None = None,
) -> NDArray[np.float64]:
    """
    Zero-mean Gaussian noise with the channel covariance divided by SNR.

    Returns one vector, or an ``(n, size)`` array of independent columns.
    """
    L = noise_factor(r, method, model)
    w = rng.standard_normal(L.shape[1] if size is None else (L.shape[1], size))
    return L @ w / math.sqrt(as_linear_snr(snr))


def estimate_delay(z: ArrayLike, grid: Grid) -> float:
    """Correlator-peak distance estimate; ties go to the smallest lag."""
    z = np.asarray(z)
    if z.shape[0] != grid.n:
        raise ValueError(f"z has {z.shape[0]} samples, grid has {grid.n}")
    return grid.points[int(np.argmax(z))]


def _trial_draws(seed: int, trial: int, prior_max: float, dim: int) -> tuple[float, NDArray[np.float64]]:
    rng = np.random.default_rng(np.random.SeedSequence([seed, trial]))
    d = rng.uniform(0.0, prior_max)
    return d, rng.standard_normal(dim)


def _run_block(args) -> NDArray[np.float64]:
    r, L, ex, snrs, seed, start, stop, prior_max = args
    draws = [_trial_draws(seed, t, prior_max, L.shape[1]) for t in range(start, stop)]
    d = np.array([a for a, _ in draws])
    w = np.stack([b for _, b in draws], axis=1)
    mean = _mean_block(r, ex, d)
    noise = L @ w
    x = r.grid.points
    out = np.empty((len(snrs), stop - start))
    for i, s in enumerate(snrs):
        z = mean + noise / math.sqrt(s)
        out[i] = np.abs(d - x[np.argmax(z, axis=0)])
    return out


def _summarize(abs_err: NDArray[np.float64], snr: float, seed: int) -> SimResult:
    sq = abs_err**2
    n = sq.size
    mse = float(sq.mean())
    half = 1.96 * float(sq.std(ddof=1)) / math.sqrt(n) if n > 1 else math.inf
    return SimResult(SnrValue(snr), n, seed, mse, (mse - half, mse + half), abs_err)


def monte_carlo_sweep(
    r: AcfVector,
    snrs: Iterable[SnrValue | float],
    trials: int,
    seed: int = 0,
    noise_method: str = "exact_cholesky",
    prior_max: float | None = None,
    workers: int = 1,
    acf_model: str = "spectral",
) -> list[SimResult]:
    """
    Ranging MSE of one waveform at several SNRs with shared per-trial draws.

    Raises
    ------
    CovarianceError
        If the Toeplitz covariance cannot be factored.
    """
    snr_lin = [as_linear_snr(s) for s in snrs]
    if not snr_lin:
        raise ValueError("need at least one SNR")
    if int(trials) != trials or trials < 1:
        raise ValueError(f"trials must be a positive integer, got {trials}")
    prior_max = r.grid.eps_max if prior_max is None else prior_max
    L = noise_factor(r, noise_method, acf_model)
    ex = acf_expansion(r, acf_model)
    blocks = [
        (r, L, ex, snr_lin, seed, s, min(s + BLOCK_SIZE, trials), prior_max)
        for s in range(0, trials, BLOCK_SIZE)
    ]
    if workers > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, blocks))
    else:
        parts = [_run_block(b) for b in blocks]
    errs = np.concatenate(parts, axis=1)
    return [_summarize(errs[i], s, seed) for i, s in enumerate(snr_lin)]


def monte_carlo_mse(r: AcfVector, cfg: SimConfig) -> SimResult:
    """Ranging MSE, its 95% normal-approximation CI and error CDF at one SNR."""
    return monte_carlo_sweep(
        r,
        [cfg.snr],
        cfg.trials,
        seed=cfg.seed,
        noise_method=cfg.noise_method,
        prior_max=cfg.prior_max,
        workers=cfg.workers,
        acf_model=cfg.acf_model,
    )[0]


@dataclass(frozen=True, eq=False)
class CdfTable:
    """CDFs of several waveforms on shared error abscissae."""

    errors: NDArray[np.float64]
    cdfs: dict[str, NDArray[np.float64]]
    crossovers: list[tuple[str, str, float]]

    def rows(self) -> list[tuple[str, float, float]]:
        return [(name, float(e), float(c)) for name, col in self.cdfs.items() for e, c in zip(self.errors, col)]


def error_cdf_report(
    results: Mapping[str, SimResult] | Sequence[SimResult], points: int = 401, eps_max: float | None = None
) -> CdfTable:
    """
    Align error CDFs on a common grid and locate pairwise crossings.

    A crossover is reported (as the first abscissa after the sign change)
    wherever the difference of two CDFs changes strict sign.
    """
    if isinstance(results, Mapping):
        named = dict(results)
    else:
        named = {f"w{i}": res for i, res in enumerate(results)}
    if not named:
        raise ValueError("need at least one result")
    top = eps_max if eps_max is not None else max(float(res.abs_errors.max()) for res in named.values())
    e = np.linspace(0.0, top if top > 0 else 1.0, points)
    cdfs = {k: res.cdf_at(e) for k, res in named.items()}
    names = list(cdfs)
    crossings = []
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            diff = cdfs[a] - cdfs[b]
            sign = np.sign(diff)
            nz = np.flatnonzero(sign)
            for j0, j1 in zip(nz[:-1], nz[1:]):
                if sign[j0] != sign[j1]:
                    crossings.append((a, b, float(e[j1])))
    return CdfTable(e, cdfs, crossings)


def dkw_epsilon(n: int, alpha: float = 0.01) -> float:
    """Dvoretzky-Kiefer-Wolfowitz band half-width at confidence ``1 - alpha``."""
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


def uniform_guess_cdf(e: ArrayLike, width: float) -> NDArray[np.float64]:
    """CDF of ``|d - g|`` for independent ``d, g`` uniform on ``[0, width]``."""
    e = np.clip(np.asarray(e, dtype=np.float64) / width, 0.0, 1.0)
    return 1.0 - (1.0 - e) ** 2
