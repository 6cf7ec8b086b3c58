"""Waveform JSON files and the CSV schemas shared by the command-line tools."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .spectrum import AcfVector, Grid, dct4

__all__ = [
    "FORMAT_VERSION",
    "MSE_COLUMNS",
    "CDF_COLUMNS",
    "TRACE_COLUMNS",
    "ENVELOPE_COLUMNS",
    "FileFormatError",
    "WaveformFile",
    "save_waveform",
    "load_waveform",
    "write_csv",
    "read_csv",
]

FORMAT_VERSION = 1

MSE_COLUMNS = ("snr_db", "waveform_id", "mse", "ci_lo", "ci_hi", "trials", "seed")
CDF_COLUMNS = ("waveform_id", "abs_error", "cum_prob")
TRACE_COLUMNS = ("iter", "objective", "alpha", "pg_norm")
ENVELOPE_COLUMNS = ("snr_db", "waveform_id", "snr_d_db", "mse", "ci_lo", "ci_hi", "nearest")


class FileFormatError(ValueError):
    """A waveform file or CSV does not follow its schema."""


@dataclass(frozen=True, eq=False)
class WaveformFile:
    """Contents of a waveform JSON file."""

    acf: AcfVector
    b_dis: int
    snr_d_db: float | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return self.acf.grid


def _num(x: float) -> float | str:
    # JSON has no literal for non-finite numbers.
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def save_waveform(path: str | Path, wf: WaveformFile) -> Path:
    """Write ``wf`` with full double precision (17 significant digits)."""
    r = wf.acf.r
    doc = {
        "version": FORMAT_VERSION,
        "n": wf.grid.n,
        "eps_max": wf.grid.eps_max,
        "b_dis": int(wf.b_dis),
        "snr_d_db": None if wf.snr_d_db is None else float(wf.snr_d_db),
        "r": [float(v) for v in r],
        "spectrum": [float(v) for v in dct4(r)],
        "meta": {k: _num(v) if isinstance(v, float) else v for k, v in wf.meta.items()},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # Python's float repr is the shortest string that round-trips exactly,
    # which never needs more than 17 significant digits.
    path.write_text(json.dumps(doc, indent=1) + "\n")
    return path


def load_waveform(path: str | Path) -> WaveformFile:
    """
    Read a waveform JSON file.

    Raises
    ------
    FileFormatError
        On a missing field, wrong version or inconsistent lengths.
    OSError
        If the file cannot be read.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise FileFormatError(f"{path}: expected a JSON object")
    missing = [k for k in ("version", "n", "eps_max", "b_dis", "r") if k not in doc]
    if missing:
        raise FileFormatError(f"{path}: missing field(s) {', '.join(missing)}")
    if doc["version"] != FORMAT_VERSION:
        raise FileFormatError(f"{path}: unsupported version {doc['version']!r}")
    try:
        grid = Grid(int(doc["n"]), float(doc["eps_max"]))
        acf = AcfVector(grid, np.asarray(doc["r"], dtype=np.float64))
    except (TypeError, ValueError) as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
    snr_d = doc.get("snr_d_db")
    return WaveformFile(acf, int(doc["b_dis"]), None if snr_d is None else float(snr_d), dict(doc.get("meta") or {}))


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def read_csv(path: str | Path, required: Sequence[str] = ()) -> list[dict[str, str]]:
    """
    Read a CSV into dicts, checking that ``required`` columns are present.

    Raises
    ------
    FileFormatError
        If the file is empty, has no data rows or lacks a required column.
    """
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise FileFormatError(f"{path}: empty CSV")
        for col in required:
            if col not in reader.fieldnames:
                raise FileFormatError(f"{path}: missing column '{col}'")
        rows = list(reader)
    if not rows:
        raise FileFormatError(f"{path}: no data rows")
    return rows
