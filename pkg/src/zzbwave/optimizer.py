"""Gradient projection with Armijo backtracking for ZZB-optimal ACF design."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray

from .projection import ProjectionConfig, dykstra_project, is_feasible
from .snr import SnrValue, as_linear_snr
from .spectrum import AcfVector, Grid, make_sinc_acf
from .zzb import zzb_gradient, zzb_hessian_diag, zzb_objective

__all__ = [
    "ArmijoConfig",
    "DesignConfig",
    "DesignResult",
    "IterationRecord",
    "NumericalError",
    "armijo_step",
    "design_waveform",
    "default_sigma",
    "projected_gradient_norm",
]

log = logging.getLogger(__name__)

STOP_WINDOW = 10
MAX_SHRINKS = 60
BB_MAX_RATIO = 1e10
SIGMA_BACKOFF = 0.1
BB_GROWTH = 10.0


class NumericalError(RuntimeError):
    """Objective or gradient became non-finite."""


@dataclass(frozen=True)
class ArmijoConfig:
    c1: float = 1e-4
    shrink: float = 0.5
    alpha_init: float = 1.0

    def __post_init__(self) -> None:
        if not 0 < self.c1 < 1:
            raise ValueError("c1 must lie in (0, 1)")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if not 0 < self.alpha_init <= 1:
            raise ValueError("alpha_init must lie in (0, 1]")


@dataclass(frozen=True)
class DesignConfig:
    """
    Settings for one design run.

    ``sigma=None`` selects ``0.5 / max(hessian_diag(r0))``, a diagonal
    Lipschitz estimate taken at the starting point. With
    ``sigma_rule="fixed"`` that step is used throughout; ``"bb"`` replaces it
    after each accepted step by the Barzilai-Borwein ratio ``s.s / s.y``,
    never going below the starting value. The Hessian diagonal spans many
    decades between the mainlobe and the tail, so a fixed step crawls at
    high design SNR.
    """

    snr_d: SnrValue
    b_dis: int = 40
    sigma: float | None = None
    max_iters: int = 500
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)
    armijo: ArmijoConfig = field(default_factory=ArmijoConfig)
    stop_tol: float = 1e-9
    sigma_rule: str = "bb"

    def __post_init__(self) -> None:
        if self.sigma_rule not in ("bb", "fixed"):
            raise ValueError(f"sigma_rule must be 'bb' or 'fixed', got {self.sigma_rule!r}")
        if not isinstance(self.snr_d, SnrValue):
            object.__setattr__(self, "snr_d", SnrValue(float(self.snr_d)))
        if self.b_dis < 1:
            raise ValueError("b_dis must be positive")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not self.stop_tol > 0:
            raise ValueError("stop_tol must be positive")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    objective: float
    alpha: float
    pg_norm: float


@dataclass(frozen=True, eq=False)
class DesignResult:
    waveform: AcfVector
    objective: float
    objective_trace: list[float]
    iterations: int
    converged: bool
    projected_gradient_norm: float
    sigma: float
    records: list[IterationRecord] = field(default_factory=list)


def default_sigma(r: AcfVector, snr: SnrValue | float) -> float:
    h = zzb_hessian_diag(r, snr)
    return 0.5 / float(np.max(h))


def _project(x: NDArray[np.float64], cfg: DesignConfig) -> NDArray[np.float64]:
    return _WarmProjector(cfg).project(x, 1.0)


class _WarmProjector:
    """Dykstra projections of ``r - sigma g`` that reuse the last dual corrections.

    Near a fixed point the corrections sum to roughly ``sigma * g``, so they
    are rescaled when sigma changes.
    """

    def __init__(self, cfg: DesignConfig) -> None:
        self.cfg = cfg
        self.state = None
        self.sigma = None
        self.sweeps = 0

    def project(self, x: NDArray[np.float64], sigma: float) -> NDArray[np.float64]:
        warm = None
        if self.state is not None:
            k = sigma / self.sigma
            warm = (self.state[0] * k, self.state[1] * k)
        res = dykstra_project(x, self.cfg.b_dis, self.cfg.projection, warm=warm)
        if not res.converged and warm is not None:
            res = dykstra_project(x, self.cfg.b_dis, self.cfg.projection)
        if not res.converged:
            log.debug("Dykstra stopped after %d sweeps, residual %.3g", res.iterations, res.residual)
        self.sweeps += res.iterations
        self.state, self.sigma = res.corrections, sigma
        return res.r


def projected_gradient_norm(r: AcfVector, cfg: DesignConfig, sigma: float | None = None) -> float:
    """``||r - P_S(r - sigma grad)|| / sigma``; zero exactly at the constrained optimum."""
    sigma = sigma if sigma is not None else (cfg.sigma or default_sigma(r, cfg.snr_d))
    g = zzb_gradient(r, cfg.snr_d)
    u = _project(r.r - sigma * g, cfg)
    return float(np.linalg.norm(r.r - u) / sigma)


def armijo_step(
    r: AcfVector,
    u: NDArray[np.float64],
    cfg: DesignConfig,
    f0: float | None = None,
    grad: NDArray[np.float64] | None = None,
) -> float | None:
    """
    Backtracking step along ``u - r`` satisfying the sufficient-decrease test.

    Returns the accepted step, or ``None`` if ``u - r`` is not a descent
    direction (stationarity) or no step passes within the shrink budget.
    """
    snr = cfg.snr_d
    f0 = zzb_objective(r, snr) if f0 is None else f0
    grad = zzb_gradient(r, snr) if grad is None else grad
    d = np.asarray(u) - r.r
    slope = float(np.dot(grad, d))
    if not slope < 0.0:
        return None
    alpha = cfg.armijo.alpha_init
    for _ in range(MAX_SHRINKS + 1):
        trial = AcfVector(r.grid, r.r + alpha * d)
        if zzb_objective(trial, snr) <= f0 + cfg.armijo.c1 * alpha * slope:
            return alpha
        alpha *= cfg.armijo.shrink
    return None


def design_waveform(
    cfg: DesignConfig,
    r0: AcfVector | None = None,
    grid: Grid | None = None,
) -> DesignResult:
    """
    Minimize the ZZB at ``cfg.snr_d`` over the feasible ACF set.

    Parameters
    ----------
    cfg
        Design settings.
    r0
        Starting ACF; defaults to the sinc ACF on ``grid``. Infeasible starts
        are projected first.
    grid
        Only needed when ``r0`` is omitted.

    Returns
    -------
    DesignResult
        ``converged`` is set when the objective stalls (relative decrease
        below ``stop_tol`` over a 10-iteration window) or the projected step
        ``||u - r|| / sqrt(n)`` falls below ``stop_tol``.
    """
    if r0 is None:
        if grid is None:
            raise ValueError("need either r0 or grid")
        r0 = make_sinc_acf(grid, cfg.b_dis)
    grid = r0.grid
    if cfg.b_dis > grid.n:
        raise ValueError(f"b_dis={cfg.b_dis} exceeds grid size {grid.n}")
    snr = cfg.snr_d
    n = grid.n

    r = np.array(r0.r, dtype=np.float64)
    if not is_feasible(r, cfg.b_dis, 1e-8):
        r = _project(r, cfg)
    cur = AcfVector(grid, r)
    projector = _WarmProjector(cfg)
    sigma0 = cfg.sigma if cfg.sigma is not None else default_sigma(cur, snr)
    sigma = sigma0
    sigma_cap = sigma0

    f = zzb_objective(cur, snr)
    if not np.isfinite(f):
        raise NumericalError(f"non-finite objective at start: {f}")
    trace = [f]
    records: list[IterationRecord] = []
    converged = False
    it = 0
    pg = np.inf
    for _ in range(cfg.max_iters):
        g = zzb_gradient(cur, snr)
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient at iteration {it + 1}")
        u = projector.project(cur.r - sigma * g, sigma)
        step = u - cur.r
        pg = float(np.linalg.norm(step) / sigma)
        if np.linalg.norm(step) / np.sqrt(n) < cfg.stop_tol:
            converged = True
            break
        alpha = armijo_step(cur, u, cfg, f0=f, grad=g)
        if alpha is None:
            if sigma > sigma0:
                # A long BB step overshot or its projection did not settle;
                # back off towards the safe step.
                sigma = max(sigma0, sigma * SIGMA_BACKOFF)
                sigma_cap = sigma
                continue
            converged = float(np.dot(g, step)) >= 0.0 or _stalled(trace, cfg.stop_tol)
            break
        it += 1
        prev, prev_g = cur, g
        cur = AcfVector(grid, cur.r + alpha * step)
        f = zzb_objective(cur, snr)
        if not np.isfinite(f):
            raise NumericalError(f"non-finite objective at iteration {it}")
        trace.append(f)
        records.append(IterationRecord(it, f, alpha, pg))
        if _stalled(trace, cfg.stop_tol):
            converged = True
            break
        if cfg.sigma_rule == "bb":
            sigma_cap = max(sigma_cap, sigma) * BB_GROWTH
            sigma = min(_bb_step(cur.r - prev.r, zzb_gradient(cur, snr) - prev_g, sigma0), sigma_cap)

    if converged:
        log.info("converged after %d iterations, ZZB %.6g", it, f)
    else:
        log.warning("iteration budget exhausted after %d iterations, ZZB %.6g", it, f)
    return DesignResult(
        waveform=cur,
        objective=f,
        objective_trace=trace,
        iterations=it,
        converged=converged,
        projected_gradient_norm=pg,
        sigma=sigma,
        records=records,
    )


def _bb_step(s: NDArray[np.float64], y: NDArray[np.float64], floor: float) -> float:
    sy = float(np.dot(s, y))
    if not sy > 0.0:
        return floor * BB_MAX_RATIO
    return float(np.clip(np.dot(s, s) / sy, floor, floor * BB_MAX_RATIO))


def _stalled(trace: list[float], tol: float) -> bool:
    if len(trace) <= STOP_WINDOW:
        return False
    old, new = trace[-1 - STOP_WINDOW], trace[-1]
    return (old - new) <= tol * max(abs(new), np.finfo(float).tiny)


def with_snr(cfg: DesignConfig, snr_d: SnrValue | float) -> DesignConfig:
    """Copy of ``cfg`` at a different design SNR."""
    if not isinstance(snr_d, SnrValue):
        snr_d = SnrValue(as_linear_snr(snr_d))
    return replace(cfg, snr_d=snr_d)
