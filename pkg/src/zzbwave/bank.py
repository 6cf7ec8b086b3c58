"""SNR-adaptive waveform selection from a bank of ZZB-optimal designs."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .io import MSE_COLUMNS, WaveformFile, load_waveform, read_csv, save_waveform, write_csv
from .optimizer import DesignConfig, DesignResult, design_waveform
from .projection import is_feasible
from .simulator import SimConfig, monte_carlo_sweep
from .snr import SnrValue
from .spectrum import AcfVector, Grid
from .zzb import zzb_objective

__all__ = [
    "BankEntry",
    "WaveformBank",
    "Selection",
    "EmptyBankError",
    "build_bank",
    "select_waveform",
    "crossover_snr",
    "save_bank",
    "load_bank",
]

log = logging.getLogger(__name__)

SELECTION_MODES = ("mse", "zzb")


class EmptyBankError(ValueError):
    """No valid entry is available for selection."""


@dataclass(frozen=True, eq=False)
class BankEntry:
    """One design of the bank; ``valid`` entries take part in selection."""

    snr_d: SnrValue
    waveform: AcfVector
    objective: float
    iterations: int
    converged: bool
    feasible: bool = True

    @property
    def valid(self) -> bool:
        return self.converged and self.feasible

    @property
    def name(self) -> str:
        return f"zzb_{self.snr_d.db:g}dB"


@dataclass(frozen=True, eq=False)
class WaveformBank:
    """
    Designs plus their simulated MSE over an operating-SNR grid.

    ``mse``, ``ci_lo`` and ``ci_hi`` have shape ``(len(entries), len(snrs_db))``.
    """

    entries: tuple[BankEntry, ...]
    b_dis: int
    snrs_db: NDArray[np.float64]
    mse: NDArray[np.float64]
    ci_lo: NDArray[np.float64]
    ci_hi: NDArray[np.float64]
    trials: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        snrs = np.asarray(self.snrs_db, dtype=np.float64)
        shape = (len(self.entries), snrs.size)
        for name in ("mse", "ci_lo", "ci_hi"):
            a = np.asarray(getattr(self, name), dtype=np.float64)
            if a.shape != shape:
                raise ValueError(f"{name} has shape {a.shape}, expected {shape}")
            object.__setattr__(self, name, a)
        object.__setattr__(self, "snrs_db", snrs)
        object.__setattr__(self, "entries", tuple(self.entries))

    @property
    def valid_indices(self) -> list[int]:
        return [i for i, e in enumerate(self.entries) if e.valid]

    def envelope(self) -> tuple[NDArray[np.float64], NDArray[np.int64]]:
        """Best MSE and the chosen entry index at each grid SNR."""
        idx = np.array([select_waveform(self, s).index for s in self.snrs_db], dtype=np.int64)
        return self.mse[idx, np.arange(self.snrs_db.size)], idx


@dataclass(frozen=True)
class Selection:
    """
    Result of a bank lookup.

    ``nearest`` is set when the requested SNR was not on the table grid and
    the closest grid column (``snr_db``) was used instead.
    """

    index: int
    entry: BankEntry
    snr_db: float
    score: float
    nearest: bool


def build_bank(
    snr_d_list: Sequence[SnrValue | float],
    design_cfg: DesignConfig,
    sim_cfg: SimConfig,
    grid: Grid,
    snrs_db: Sequence[float],
    continuation: bool = True,
) -> WaveformBank:
    """
    Design one waveform per design SNR and tabulate their simulated MSE.

    Parameters
    ----------
    snr_d_list
        Design SNRs (``SnrValue`` or linear floats).
    design_cfg
        Template; its ``snr_d`` is replaced per entry.
    sim_cfg
        Template for trials, seed, noise method and workers; its ``snr`` is
        ignored in favour of ``snrs_db``.
    grid
        Lag grid for all designs.
    snrs_db
        Operating SNR grid of the MSE table.
    continuation
        Start each design from the previous one (in increasing SNR order).
        The objective is convex, so this changes only the run time.

    Notes
    -----
    Every entry is simulated with the same seed, so all waveforms see the
    same true distances and standard-normal draws.
    """
    snrs_d = [s if isinstance(s, SnrValue) else SnrValue(float(s)) for s in snr_d_list]
    if not snrs_d:
        raise ValueError("need at least one design SNR")
    snrs_db = np.asarray(sorted(float(s) for s in snrs_db), dtype=np.float64)
    if snrs_db.size == 0:
        raise ValueError("need at least one operating SNR")
    order = sorted(range(len(snrs_d)), key=lambda i: snrs_d[i].linear)
    designs: dict[int, DesignResult] = {}
    prev = None
    for i in order:
        cfg = replace(design_cfg, snr_d=snrs_d[i])
        res = design_waveform(cfg, r0=prev if continuation else None, grid=grid)
        if not res.converged:
            log.warning("design at %.4g dB did not converge; excluded from selection", snrs_d[i].db)
        designs[i] = res
        prev = res.waveform

    entries = []
    mse = np.empty((len(snrs_d), snrs_db.size))
    lo, hi = np.empty_like(mse), np.empty_like(mse)
    ops = [SnrValue.from_db(s) for s in snrs_db]
    for i, s in enumerate(snrs_d):
        res = designs[i]
        feas = bool(is_feasible(res.waveform.r, design_cfg.b_dis))
        entries.append(BankEntry(s, res.waveform, res.objective, res.iterations, res.converged, feas))
        sims = monte_carlo_sweep(
            res.waveform,
            ops,
            sim_cfg.trials,
            seed=sim_cfg.seed,
            noise_method=sim_cfg.noise_method,
            prior_max=sim_cfg.prior_max,
            workers=sim_cfg.workers,
            acf_model=sim_cfg.acf_model,
        )
        for j, sim in enumerate(sims):
            mse[i, j] = sim.mse
            lo[i, j], hi[i, j] = sim.mse_ci95
    return WaveformBank(tuple(entries), design_cfg.b_dis, snrs_db, mse, lo, hi, sim_cfg.trials, sim_cfg.seed)


def select_waveform(bank: WaveformBank, operating_snr_db: float, mode: str = "mse") -> Selection:
    """
    Pick the entry with the lowest simulated MSE (or ZZB) at an operating SNR.

    Off-grid SNRs use the nearest table column and are flagged. Equal scores
    go to the entry with the lower design SNR.

    Raises
    ------
    EmptyBankError
        If the bank has no valid entry.
    """
    if mode not in SELECTION_MODES:
        raise ValueError(f"mode must be one of {SELECTION_MODES}, got {mode!r}")
    valid = bank.valid_indices
    if not valid:
        raise EmptyBankError("bank has no valid entries")
    s = float(operating_snr_db)
    if mode == "zzb":
        # Closed form: no table lookup needed.
        scores = {i: zzb_objective(bank.entries[i].waveform, SnrValue.from_db(s)) for i in valid}
        used, nearest = s, False
    else:
        j = int(np.argmin(np.abs(bank.snrs_db - s)))
        used = float(bank.snrs_db[j])
        nearest = not np.isclose(used, s, rtol=0.0, atol=1e-9)
        if nearest:
            log.info("operating SNR %.4g dB not on the table grid; using %.4g dB", s, used)
        scores = {i: float(bank.mse[i, j]) for i in valid}
    best = min(valid, key=lambda i: (scores[i], bank.entries[i].snr_d.linear))
    return Selection(best, bank.entries[best], used, scores[best], nearest)


def crossover_snr(bank: WaveformBank, index: int) -> float | None:
    """
    Operating SNR at which entry ``index`` first becomes the MSE-best valid entry.

    The switch point is refined by linear interpolation of the log-MSE gap
    to the best competitor between the last grid SNR where the entry loses
    and the first where it wins. Returns ``None`` if it never wins, and the
    lowest grid SNR if it wins from the start.
    """
    valid = bank.valid_indices
    if index not in valid:
        raise ValueError(f"entry {index} is not a valid bank entry")
    others = [i for i in valid if i != index]
    if not others:
        return float(bank.snrs_db[0])
    chosen = np.array([select_waveform(bank, s).index for s in bank.snrs_db])
    wins = np.flatnonzero(chosen == index)
    if wins.size == 0:
        return None
    j = int(wins[0])
    if j == 0:
        return float(bank.snrs_db[0])
    gap = np.log(bank.mse[index]) - np.log(bank.mse[others].min(axis=0))
    g0, g1 = gap[j - 1], gap[j]
    s0, s1 = bank.snrs_db[j - 1], bank.snrs_db[j]
    if not g0 > g1:
        return float(s1)
    return float(s0 + (s1 - s0) * g0 / (g0 - g1))


def save_bank(bank: WaveformBank, directory: str | Path) -> Path:
    """Write waveform JSONs, a ``bank.json`` index and ``mse_table.csv``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    index = []
    for e in bank.entries:
        fname = f"{e.name}.json"
        meta = {"objective": e.objective, "iterations": e.iterations, "converged": e.converged}
        save_waveform(d / fname, WaveformFile(e.waveform, bank.b_dis, e.snr_d.db, meta))
        index.append({"waveform_id": e.name, "file": fname, "snr_d_db": e.snr_d.db, "valid": e.valid, "feasible": e.feasible})
    doc = {
        "version": 1,
        "b_dis": bank.b_dis,
        "snrs_db": bank.snrs_db.tolist(),
        "trials": bank.trials,
        "seed": bank.seed,
        "entries": index,
    }
    (d / "bank.json").write_text(json.dumps(doc, indent=1) + "\n")
    rows = (
        (float(s), e.name, bank.mse[i, j], bank.ci_lo[i, j], bank.ci_hi[i, j], bank.trials, bank.seed)
        for i, e in enumerate(bank.entries)
        for j, s in enumerate(bank.snrs_db)
    )
    write_csv(d / "mse_table.csv", MSE_COLUMNS, rows)
    return d


def load_bank(directory: str | Path) -> WaveformBank:
    d = Path(directory)
    doc = json.loads((d / "bank.json").read_text())
    snrs = np.asarray(doc["snrs_db"], dtype=np.float64)
    entries = []
    for item in doc["entries"]:
        wf = load_waveform(d / item["file"])
        m = wf.meta
        entries.append(
            BankEntry(
                SnrValue.from_db(item["snr_d_db"]),
                wf.acf,
                float(m.get("objective", np.nan)),
                int(m.get("iterations", 0)),
                bool(m.get("converged", False)),
                bool(item.get("feasible", True)),
            )
        )
    shape = (len(entries), snrs.size)
    mse, lo, hi = np.full(shape, np.nan), np.full(shape, np.nan), np.full(shape, np.nan)
    pos = {e.name: i for i, e in enumerate(entries)}
    for row in read_csv(d / "mse_table.csv", MSE_COLUMNS):
        i = pos[row["waveform_id"]]
        j = int(np.argmin(np.abs(snrs - float(row["snr_db"]))))
        mse[i, j], lo[i, j], hi[i, j] = float(row["mse"]), float(row["ci_lo"]), float(row["ci_hi"])
    return WaveformBank(tuple(entries), int(doc["b_dis"]), snrs, mse, lo, hi, int(doc["trials"]), int(doc["seed"]))
