"""Command-line front end: ``zzbwave design | eval | adaptive | plot | replay``.

Exit codes: 0 success, 1 invalid input, 2 iteration budget exhausted
(outputs are still written), 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .bank import EmptyBankError, build_bank, save_bank, select_waveform
from .io import (
    CDF_COLUMNS,
    ENVELOPE_COLUMNS,
    MSE_COLUMNS,
    TRACE_COLUMNS,
    FileFormatError,
    WaveformFile,
    load_waveform,
    read_csv,
    save_waveform,
    write_csv,
)
from .optimizer import ArmijoConfig, DesignConfig, NumericalError, design_waveform
from .plot import Series, bar_chart, line_chart
from .projection import ProjectionConfig
from .simulator import ACF_MODELS, NOISE_METHODS, CovarianceError, SimConfig, error_cdf_report, monte_carlo_sweep
from .snr import SnrValue
from .spectrum import DegenerateSpectrumError, Grid, crb, dct_forward, make_sinc_acf, make_single_tone_acf
from .zzb import zzb_objective

log = logging.getLogger("zzbwave")

EXIT_OK, EXIT_USAGE, EXIT_BUDGET, EXIT_NUMERIC = 0, 1, 2, 3
SEED_ENV = "ZZBWAVE_SEED"
MSE_EXTRA = ("zzb", "crb")


class UsageError(Exception):
    """Bad flags or unusable input files (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; 2 is reserved for budget exhaustion here.
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- flag parsing


def _db_range(text: str) -> list[float]:
    try:
        lo, step, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:step:hi, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"need step > 0 and hi >= lo, got {text!r}")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + k * step, 12) for k in range(count)]


def _db_list(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated dB values, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0 or not np.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an unsigned 64-bit integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed out of range: {v}")
    return v


def _resolve_seed(arg: int | None) -> int:
    if arg is not None:
        return arg
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return _seed(env)
    except argparse.ArgumentTypeError as exc:
        raise UsageError(f"{SEED_ENV}: {exc}") from None


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=_positive_int, default=1000, help="grid size (default 1000)")
    p.add_argument("--b-dis", type=_positive_int, default=40, help="band-limit index (default 40)")
    p.add_argument("--eps-max", type=_positive_float, default=2.0, help="maximum ranging error (default 2.0)")


def _add_design_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sigma", type=_positive_float, help="fixed pre-projection step")
    p.add_argument("--sigma-rule", choices=("bb", "fixed"), default="bb")
    p.add_argument("--max-iters", type=_positive_int, default=500)
    p.add_argument("--dykstra-iters", type=_positive_int, default=ProjectionConfig().max_dykstra_iters)
    p.add_argument("--tol", type=_positive_float, default=1e-9, help="stopping tolerance")


def _add_sim_flags(p: argparse.ArgumentParser, range_required: bool = True) -> None:
    p.add_argument("--snr-db-range", type=_db_range, required=range_required, metavar="LO:STEP:HI")
    p.add_argument("--trials", type=_positive_int, default=10000)
    p.add_argument("--seed", type=_seed, help=f"master seed (falls back to ${SEED_ENV}, then 0)")
    p.add_argument("--noise-method", choices=NOISE_METHODS, default="exact_cholesky")
    p.add_argument("--acf-model", choices=ACF_MODELS, default="spectral")
    p.add_argument("--workers", type=_positive_int, default=1)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="zzbwave", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("design", help="design a ZZB-optimal ACF")
    d.add_argument("--snr-d-db", type=float, required=True)
    _add_grid_flags(d)
    _add_design_flags(d)
    d.add_argument("--init", default="sinc", help="sinc | file:<path>")
    d.add_argument("--out", required=True, type=Path)

    e = sub.add_parser("eval", help="Monte Carlo MSE and error CDF of waveforms")
    e.add_argument("--waveform", action="append", required=True, help="path | sinc | tone (repeatable)")
    _add_grid_flags(e)
    _add_sim_flags(e)
    e.add_argument("--cdf-at-db", type=float, help="also write error CDFs at this SNR")
    e.add_argument("--out", required=True, type=Path)

    a = sub.add_parser("adaptive", help="build a waveform bank and its adaptive envelope")
    grp = a.add_mutually_exclusive_group(required=True)
    grp.add_argument("--snr-d-list", type=_db_list, metavar="DB,DB,...")
    grp.add_argument("--snr-d-grid", type=_db_range, metavar="LO:STEP:HI")
    _add_grid_flags(a)
    _add_design_flags(a)
    _add_sim_flags(a)
    a.add_argument("--select", choices=("mse", "zzb"), default="mse")
    a.add_argument("--out", required=True, type=Path)

    pl = sub.add_parser("plot", help="render CSV or waveform files as SVG")
    pl.add_argument("kind", choices=("mse", "cdf", "envelope", "psd", "acf"))
    pl.add_argument("inputs", nargs="+", type=Path)
    pl.add_argument("--logy", action="store_true", help="log-scale y axis (default for mse/envelope)")
    pl.add_argument("--linear", action="store_true", help="force a linear y axis")
    pl.add_argument("--out", required=True, type=Path)

    r = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    r.add_argument("manifest", type=Path)
    return p


# ---------------------------------------------------------------- helpers


def _write_manifest(out: Path, args: argparse.Namespace, argv: Sequence[str], outputs: list[Path], t0: float, **extra) -> Path:
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"}
    doc = {
        "command": args.command,
        "argv": list(argv),
        "config": cfg,
        "seed": extra.pop("seed", None),
        "version": __version__,
        "outputs": sorted(str(p) for p in outputs),
        "wall_clock_s": time.perf_counter() - t0,
        **extra,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(doc, indent=1, default=str) + "\n")
    return path


def _design_cfg(args: argparse.Namespace, snr_d_db: float) -> DesignConfig:
    return DesignConfig(
        snr_d=SnrValue.from_db(snr_d_db),
        b_dis=args.b_dis,
        sigma=args.sigma,
        max_iters=args.max_iters,
        projection=ProjectionConfig(max_dykstra_iters=args.dykstra_iters),
        armijo=ArmijoConfig(),
        stop_tol=args.tol,
        sigma_rule=args.sigma_rule,
    )


def _check_band(args: argparse.Namespace) -> None:
    if args.b_dis > args.n:
        raise UsageError(f"--b-dis {args.b_dis} exceeds --n {args.n}")


def _read_waveform(path: str) -> WaveformFile:
    try:
        return load_waveform(path)
    except (OSError, FileFormatError) as exc:
        raise UsageError(f"cannot read waveform {path}: {exc}") from None


def _named_waveform(source: str, args: argparse.Namespace) -> tuple[str, WaveformFile]:
    grid = Grid(args.n, args.eps_max)
    if source == "sinc":
        return "sinc", WaveformFile(make_sinc_acf(grid, args.b_dis), args.b_dis)
    if source == "tone":
        return "tone", WaveformFile(make_single_tone_acf(grid, args.b_dis), args.b_dis)
    return _waveform_id(Path(source)), _read_waveform(source)


def _waveform_id(path: Path) -> str:
    # design outputs are all called waveform.json; their directory names them
    return path.parent.name if path.stem == "waveform" and path.parent.name else path.stem


# ---------------------------------------------------------------- commands


def cmd_design(args: argparse.Namespace, argv: Sequence[str]) -> int:
    t0 = time.perf_counter()
    _check_band(args)
    grid = Grid(args.n, args.eps_max)
    if args.init == "sinc":
        r0 = None
    elif args.init.startswith("file:"):
        wf = _read_waveform(args.init[5:])
        if wf.grid != grid:
            raise UsageError(f"--init grid (n={wf.grid.n}, eps_max={wf.grid.eps_max}) does not match the requested grid")
        r0 = wf.acf
    else:
        raise UsageError(f"--init must be 'sinc' or 'file:<path>', got {args.init!r}")
    cfg = _design_cfg(args, args.snr_d_db)
    res = design_waveform(cfg, r0=r0, grid=grid)

    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "objective": res.objective,
        "iterations": res.iterations,
        "converged": res.converged,
        "projected_gradient_norm": res.projected_gradient_norm,
    }
    wf_path = save_waveform(out / "waveform.json", WaveformFile(res.waveform, args.b_dis, args.snr_d_db, meta))
    trace_path = write_csv(
        out / "trace.csv",
        TRACE_COLUMNS,
        [(0, res.objective_trace[0], 0.0, float("nan"))] + [(k.iteration, k.objective, k.alpha, k.pg_norm) for k in res.records],
    )
    _write_manifest(out, args, argv, [wf_path, trace_path], t0, converged=res.converged, iterations=res.iterations)
    print(f"ZZB {res.objective:.10g} after {res.iterations} iterations ({'converged' if res.converged else 'budget exhausted'})")
    return EXIT_OK if res.converged else EXIT_BUDGET


def cmd_eval(args: argparse.Namespace, argv: Sequence[str]) -> int:
    t0 = time.perf_counter()
    _check_band(args)
    seed = _resolve_seed(args.seed)
    named = [_named_waveform(w, args) for w in args.waveform]
    ids = [n for n, _ in named]
    if len(set(ids)) != len(ids):
        raise UsageError(f"duplicate waveform ids: {ids}")
    snrs_db = list(args.snr_db_range)
    cdf_db = args.cdf_at_db
    sim_db = snrs_db + ([cdf_db] if cdf_db is not None and cdf_db not in snrs_db else [])
    rows, cdf_results = [], {}
    for name, wf in named:
        sims = monte_carlo_sweep(
            wf.acf,
            [SnrValue.from_db(s) for s in sim_db],
            args.trials,
            seed=seed,
            noise_method=args.noise_method,
            workers=args.workers,
            acf_model=args.acf_model,
        )
        psd = dct_forward(wf.acf, wf.b_dis)
        for s, sim in zip(sim_db, sims):
            if cdf_db is not None and s == cdf_db:
                cdf_results[name] = sim
            if s not in snrs_db:
                continue
            snr = SnrValue.from_db(s)
            try:
                bound = crb(psd, snr)
            except DegenerateSpectrumError:
                bound = float("nan")
            lo, hi = sim.mse_ci95
            rows.append((s, name, sim.mse, lo, hi, sim.trials, seed, zzb_objective(wf.acf, snr), bound))

    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    outputs = [write_csv(out / "mse.csv", MSE_COLUMNS + MSE_EXTRA, rows)]
    if cdf_results:
        table = error_cdf_report(cdf_results, eps_max=named[0][1].grid.eps_max)
        outputs.append(write_csv(out / "cdf.csv", CDF_COLUMNS, table.rows()))
        for a, b, e in table.crossovers:
            log.info("CDF crossover %s / %s at |error| = %.4g", a, b, e)
    _write_manifest(out, args, argv, outputs, t0, seed=seed)
    for row in rows:
        print(f"{row[1]:>16s} {row[0]:6.2f} dB  MSE {row[2]:.4e}  ZZB {row[7]:.4e}  CRB {row[8]:.4e}")
    return EXIT_OK


def cmd_adaptive(args: argparse.Namespace, argv: Sequence[str]) -> int:
    t0 = time.perf_counter()
    _check_band(args)
    seed = _resolve_seed(args.seed)
    snr_d = args.snr_d_list if args.snr_d_list is not None else args.snr_d_grid
    grid = Grid(args.n, args.eps_max)
    sim = SimConfig(SnrValue(1.0), args.trials, seed, args.noise_method, None, args.workers, args.acf_model)
    bank = build_bank([SnrValue.from_db(s) for s in snr_d], _design_cfg(args, snr_d[0]), sim, grid, args.snr_db_range)

    out: Path = args.out
    save_bank(bank, out)
    outputs = [out / "bank.json", out / "mse_table.csv"] + [out / f"{e.name}.json" for e in bank.entries]
    rows = []
    status = EXIT_OK
    try:
        for j, s in enumerate(bank.snrs_db):
            sel = select_waveform(bank, s, args.select)
            rows.append(
                (float(s), sel.entry.name, sel.entry.snr_d.db, bank.mse[sel.index, j], bank.ci_lo[sel.index, j], bank.ci_hi[sel.index, j], int(sel.nearest))
            )
    except EmptyBankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_BUDGET
    outputs.append(write_csv(out / "adaptive_envelope.csv", ENVELOPE_COLUMNS, rows))
    bad = [e.name for e in bank.entries if not e.valid]
    if bad:
        log.warning("entries excluded from selection: %s", ", ".join(bad))
        status = EXIT_BUDGET
    _write_manifest(out, args, argv, outputs, t0, seed=seed, excluded=bad)
    for row in rows:
        print(f"{row[0]:6.2f} dB  best {row[1]:>12s}  MSE {row[3]:.4e}")
    return status


def _group(rows: list[dict[str, str]], key: str) -> dict[str, list[dict[str, str]]]:
    out: dict[str, list[dict[str, str]]] = {}
    for row in rows:
        out.setdefault(row[key], []).append(row)
    return out


def _floats(rows: list[dict[str, str]], col: str) -> list[float]:
    try:
        return [float(r[col]) for r in rows]
    except ValueError as exc:
        raise UsageError(f"column '{col}': {exc}") from None


def cmd_plot(args: argparse.Namespace, argv: Sequence[str]) -> int:
    kind = args.kind
    logy = (args.logy or kind in ("mse", "envelope")) and not args.linear
    series: dict[str, Series] = {}
    if kind in ("psd", "acf"):
        for path in args.inputs:
            wf = _read_waveform(str(path))
            if _waveform_id(path) in series:
                raise UsageError(f"duplicate waveform id {_waveform_id(path)!r}; rename one of the inputs")
            if kind == "psd":
                k = np.arange(1, wf.b_dis + 1)
                p = dct_forward(wf.acf).coeffs[: wf.b_dis]
                series[_waveform_id(path)] = Series(k.tolist(), (p / p.sum()).tolist())
            else:
                series[_waveform_id(path)] = Series(wf.grid.points.tolist(), wf.acf.r.tolist())
        if kind == "psd":
            svg = bar_chart(series, "Normalized PSD", "DCT-IV index k", "p_k / sum p")
        else:
            svg = line_chart(series, "Normalized ACF", "lag", "R", logy=args.logy and not args.linear)
    else:
        try:
            rows = [r for path in args.inputs for r in read_csv(path, _PLOT_COLUMNS[kind])]
        except FileFormatError as exc:
            raise UsageError(str(exc)) from None
        except OSError as exc:
            raise UsageError(f"cannot read {exc.filename}: {exc.strerror}") from None
        if kind == "mse":
            for wid, grp in _group(rows, "waveform_id").items():
                x = _floats(grp, "snr_db")
                series[f"{wid} mse"] = Series(x, _floats(grp, "mse"))
                for col in MSE_EXTRA:
                    if col in grp[0]:
                        series[f"{wid} {col}"] = Series(x, _floats(grp, col))
            svg = line_chart(series, "Ranging MSE and bounds", "SNR (dB)", "MSE", logy=logy)
        elif kind == "envelope":
            series["adaptive"] = Series(_floats(rows, "snr_db"), _floats(rows, "mse"))
            svg = line_chart(series, "Adaptive envelope", "SNR (dB)", "MSE", logy=logy)
        else:
            for wid, grp in _group(rows, "waveform_id").items():
                series[wid] = Series(_floats(grp, "abs_error"), _floats(grp, "cum_prob"))
            svg = line_chart(series, "Absolute error CDF", "|error|", "cumulative probability", logy=args.logy and not args.linear)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(svg)
    print(f"wrote {args.out}")
    return EXIT_OK


_PLOT_COLUMNS = {
    "mse": ("snr_db", "waveform_id", "mse"),
    "envelope": ("snr_db", "waveform_id", "mse"),
    "cdf": CDF_COLUMNS,
}


def cmd_replay(args: argparse.Namespace, argv: Sequence[str]) -> int:
    try:
        doc = json.loads(args.manifest.read_text())
        recorded = doc["argv"]
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read manifest {args.manifest}: {exc}") from None
    return main(recorded)


COMMANDS = {"design": cmd_design, "eval": cmd_eval, "adaptive": cmd_adaptive, "plot": cmd_plot, "replay": cmd_replay}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
        )
        return COMMANDS[args.command](args, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, CovarianceError, DegenerateSpectrumError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # Config validation in the library raises ValueError.
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
