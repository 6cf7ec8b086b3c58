"""Euclidean projection onto the feasible ACF set via Dykstra's alternating projections.

The feasible set is the intersection of

* ``T``: pinned zero-lag sample (``r_1 = 1``) and ``r <= 1`` elementwise;
* ``F``: nonnegative DCT-IV spectrum, zero above the band index ``b_dis``.

Both have closed-form projections; ``F`` is handled in the transform domain,
which is exact because the DCT-IV is orthogonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .spectrum import dct4, idct4

__all__ = [
    "ProjectionConfig",
    "ProjectionResult",
    "FeasibilityReport",
    "project_T",
    "project_F",
    "dykstra_project",
    "is_feasible",
]


@dataclass(frozen=True)
class ProjectionConfig:
    """
    Parameters
    ----------
    max_dykstra_iters
        Number of Dykstra sweeps ``K`` (one ``T`` and one ``F`` projection each).
    residual_tol
        Stop when the max-norm change of the iterate falls below this.
    """

    max_dykstra_iters: int = 2000
    residual_tol: float = 1e-10

    def __post_init__(self) -> None:
        if self.max_dykstra_iters < 1:
            raise ValueError("max_dykstra_iters must be positive")
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")


@dataclass(frozen=True, eq=False)
class ProjectionResult:
    r: NDArray[np.float64]
    iterations: int
    converged: bool
    residual: float
    corrections: tuple[NDArray[np.float64], NDArray[np.float64]] | None = None


@dataclass(frozen=True)
class FeasibilityReport:
    """Worst violation per constraint family (0 when satisfied)."""

    feasible: bool
    pinned: float
    upper_bound: float
    nonnegative_spectrum: float
    out_of_band: float
    tol: float
    violated: tuple[str, ...] = field(default=())

    def __bool__(self) -> bool:
        return self.feasible


def project_T(x: ArrayLike) -> NDArray[np.float64]:
    """Set the first entry to one and clip the rest at one."""
    o = np.minimum(np.asarray(x, dtype=np.float64), 1.0)
    o[0] = 1.0
    return o


def _clip_spectrum(c: NDArray[np.float64], b_dis: int) -> NDArray[np.float64]:
    c = np.maximum(c, 0.0)
    c[b_dis:] = 0.0
    return c


def project_F(x: ArrayLike, b_dis: int) -> NDArray[np.float64]:
    """Zero out negative and out-of-band DCT-IV coefficients."""
    x = np.asarray(x, dtype=np.float64)
    return idct4(_clip_spectrum(dct4(x), b_dis))


def dykstra_project(
    x: ArrayLike,
    b_dis: int,
    cfg: ProjectionConfig | None = None,
    warm: tuple[NDArray[np.float64], NDArray[np.float64]] | None = None,
) -> ProjectionResult:
    """
    Project ``x`` onto ``T & F`` with Dykstra's method.

    Correction vectors start at zero and are per-call locals. If the sweep
    budget runs out first, the last iterate is returned with
    ``converged=False``.

    Dykstra's method is block coordinate ascent on the dual problem, with the
    primal iterate equal to ``x - p - q``; it therefore converges to the same
    projection from any starting pair of corrections. ``warm`` passes the
    ``corrections`` of a previous call for a nearby ``x``, which cuts the
    sweep count sharply inside an optimization loop.

    The returned point is always exactly feasible: the last ``F`` iterate is
    rescaled to ``r_1 = 1`` (``F`` is a cone) and, if that lifts any sample
    above one, blended with the sinc ACF, which lies strictly below one away
    from zero lag. Both corrections are of the order of the Dykstra residual.
    """
    cfg = cfg or ProjectionConfig()
    x = np.asarray(x, dtype=np.float64)
    if warm is None:
        p = np.zeros_like(x)
        q = np.zeros_like(x)
    else:
        p, q = (np.array(v, dtype=np.float64) for v in warm)
    cur = x - p - q
    converged = False
    residual = np.inf
    k = 0
    for k in range(1, cfg.max_dykstra_iters + 1):
        a = project_T(cur + p)
        p = cur + p - a
        nxt = project_F(a + q, b_dis)
        q = a + q - nxt
        residual = float(np.max(np.abs(nxt - cur)))
        # Also require the T-step to be (nearly) a no-op so that an unchanged
        # F-iterate is not mistaken for convergence.
        gap = float(np.max(np.abs(nxt - a)))
        cur = nxt
        if residual < cfg.residual_tol and gap < cfg.residual_tol:
            converged = True
            break
    return ProjectionResult(_restore(cur, b_dis), k, converged, residual, (p, q))


def _sinc_anchor(n: int, b_dis: int) -> NDArray[np.float64]:
    a = idct4(np.concatenate([np.ones(b_dis), np.zeros(n - b_dis)]))
    return a / a[0]


def _restore(r: NDArray[np.float64], b_dis: int) -> NDArray[np.float64]:
    # Nonnegative in-band spectrum forces r[0] > 0 unless the spectrum is empty.
    if not r[0] > 1e-12:
        out = _sinc_anchor(r.size, b_dis)
        out[0] = 1.0
        return out
    out = r / r[0]
    over = out[1:] > 1.0
    if np.any(over):
        anchor = _sinc_anchor(r.size, b_dis)
        ui, si = out[1:][over], anchor[1:][over]
        lam = float(np.max((ui - 1.0) / (ui - si)))
        out = (1.0 - lam) * out + lam * anchor
        out = np.minimum(out, 1.0)
    out[0] = 1.0
    return out


def is_feasible(r: ArrayLike, b_dis: int, tol: float = 1e-8) -> FeasibilityReport:
    """Check membership in the feasible set and report per-family violations."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    r = np.asarray(r, dtype=np.float64)
    c = dct4(r)
    pinned = abs(r[0] - 1.0)
    upper = max(float(np.max(r - 1.0)), 0.0)
    neg = max(float(-np.min(c)), 0.0)
    oob = float(np.max(np.abs(c[b_dis:]))) if b_dis < r.size else 0.0
    families = {
        "pinned": pinned,
        "upper_bound": upper,
        "nonnegative_spectrum": neg,
        "out_of_band": oob,
    }
    violated = tuple(name for name, v in families.items() if v > tol)
    return FeasibilityReport(not violated, pinned, upper, neg, oob, tol, violated)
