import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from zzbwave import cli
from zzbwave.io import read_csv
from zzbwave.optimizer import NumericalError

SVG = "{http://www.w3.org/2000/svg}"
SMALL = ["--n", "128", "--b-dis", "8"]


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def designed(tmp_path_factory):
    root = tmp_path_factory.mktemp("designs")
    for db in (5, 25):
        assert run("design", "--snr-d-db", db, *SMALL, "--max-iters", 2000, "--out", root / f"zzb{db}") == cli.EXIT_OK
    return root


# ---------------------------------------------------------------- design


def test_design_outputs(designed):
    d = designed / "zzb5"
    doc = json.loads((d / "waveform.json").read_text())
    assert doc["n"] == 128 and doc["b_dis"] == 8 and doc["snr_d_db"] == 5.0
    assert doc["meta"]["converged"] is True
    trace = read_csv(d / "trace.csv", ["iter", "objective", "alpha", "pg_norm"])
    obj = [float(r["objective"]) for r in trace]
    assert all(b <= a + 1e-15 for a, b in zip(obj, obj[1:]))
    man = json.loads((d / "manifest.json").read_text())
    assert man["command"] == "design" and man["converged"] is True
    assert {p.split("/")[-1] for p in man["outputs"]} == {"waveform.json", "trace.csv"}


def test_resume_from_converged_file(designed, tmp_path, capsys):
    src = designed / "zzb5" / "waveform.json"
    assert run("design", "--snr-d-db", 5, *SMALL, "--init", f"file:{src}", "--out", tmp_path) == cli.EXIT_OK
    doc = json.loads((tmp_path / "waveform.json").read_text())
    assert doc["meta"]["iterations"] <= 1


def test_budget_exhaustion_exit_code(tmp_path):
    assert run("design", "--snr-d-db", 20, *SMALL, "--max-iters", 1, "--out", tmp_path) == cli.EXIT_BUDGET
    # outputs are written anyway
    assert (tmp_path / "waveform.json").exists() and (tmp_path / "manifest.json").exists()


@pytest.mark.parametrize(
    "argv",
    [
        ["design", "--snr-d-db", "10"],
        ["design", "--snr-d-db", "10", "--n", "0", "--out", "x"],
        ["design", "--snr-d-db", "10", "--n", "16", "--b-dis", "17", "--out", "x"],
        ["design", "--snr-d-db", "10", "--init", "bogus", "--out", "x"],
        ["design", "--snr-d-db", "10", "--init", "file:/nonexistent.json", "--out", "x"],
        ["eval", "--waveform", "sinc", "--snr-db-range", "0:5:10", "--trials", "0", "--out", "x"],
        ["eval", "--waveform", "sinc", "--snr-db-range", "10:5:0", "--out", "x"],
        ["eval", "--waveform", "sinc", "--waveform", "sinc", "--snr-db-range", "0:5:10", "--out", "x"],
        ["frobnicate"],
    ],
)
def test_usage_errors(argv, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert cli.main(argv) == cli.EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_init_grid_mismatch(designed, tmp_path, capsys):
    src = designed / "zzb5" / "waveform.json"
    code = run("design", "--snr-d-db", 5, "--n", 64, "--b-dis", 8, "--init", f"file:{src}", "--out", tmp_path)
    assert code == cli.EXIT_USAGE and "does not match" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise NumericalError("non-finite objective")

    monkeypatch.setattr(cli, "design_waveform", boom)
    assert run("design", "--snr-d-db", 10, *SMALL, "--out", tmp_path) == cli.EXIT_NUMERIC


def test_unreadable_waveform(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    code = run("eval", "--waveform", bad, *SMALL, "--snr-db-range", "0:5:10", "--trials", 10, "--out", tmp_path / "o")
    assert code == cli.EXIT_USAGE and "bad.json" in capsys.readouterr().err


# ---------------------------------------------------------------- eval


@pytest.fixture(scope="module")
def evaluated(designed, tmp_path_factory):
    out = tmp_path_factory.mktemp("eval")
    code = run(
        "eval", "--waveform", "sinc", "--waveform", "tone", "--waveform", designed / "zzb5" / "waveform.json",
        *SMALL, "--snr-db-range", "0:10:20", "--trials", 400, "--seed", 9, "--cdf-at-db", 5, "--out", out,
    )
    assert code == cli.EXIT_OK
    return out


def test_eval_tables(evaluated):
    rows = read_csv(evaluated / "mse.csv", ["snr_db", "waveform_id", "mse", "ci_lo", "ci_hi", "trials", "seed", "zzb", "crb"])
    assert {r["waveform_id"] for r in rows} == {"sinc", "tone", "zzb5"}
    assert len(rows) == 9
    for r in rows:
        assert float(r["ci_lo"]) <= float(r["mse"]) <= float(r["ci_hi"])
        assert int(r["trials"]) == 400 and int(r["seed"]) == 9
    by = {(r["waveform_id"], float(r["snr_db"])): float(r["mse"]) for r in rows}
    # the tone is ambiguity-dominated at low SNR
    assert by[("tone", 0.0)] > by[("sinc", 0.0)]
    cdf = read_csv(evaluated / "cdf.csv", ["waveform_id", "abs_error", "cum_prob"])
    assert {r["waveform_id"] for r in cdf} == {"sinc", "tone", "zzb5"}
    # rows of cdf.csv are ordered by error within each waveform
    for wid in ("sinc", "tone"):
        p = [float(r["cum_prob"]) for r in cdf if r["waveform_id"] == wid]
        assert p == sorted(p) and p[-1] == 1.0


def test_seed_env_fallback(tmp_path, monkeypatch):
    common = ["eval", "--waveform", "sinc", *SMALL, "--snr-db-range", "10:1:10", "--trials", "50"]
    monkeypatch.setenv(cli.SEED_ENV, "77")
    assert cli.main(common + ["--out", str(tmp_path / "a")]) == cli.EXIT_OK
    assert cli.main(common + ["--seed", "77", "--out", str(tmp_path / "b")]) == cli.EXIT_OK
    assert (tmp_path / "a" / "mse.csv").read_bytes() == (tmp_path / "b" / "mse.csv").read_bytes()
    assert json.loads((tmp_path / "a" / "manifest.json").read_text())["seed"] == 77
    monkeypatch.setenv(cli.SEED_ENV, "-3")
    assert cli.main(common + ["--out", str(tmp_path / "c")]) == cli.EXIT_USAGE


# ---------------------------------------------------------------- adaptive


def test_adaptive_bank(tmp_path):
    out = tmp_path / "bank"
    code = run(
        "adaptive", "--snr-d-list", "5,15,25", *SMALL, "--max-iters", 2000,
        "--snr-db-range", "0:10:30", "--trials", 300, "--seed", 1, "--out", out,
    )
    assert code == cli.EXIT_OK
    table = read_csv(out / "mse_table.csv", ["snr_db", "waveform_id", "mse"])
    env = read_csv(out / "adaptive_envelope.csv", ["snr_db", "waveform_id", "snr_d_db", "mse", "nearest"])
    assert len(env) == 4
    for row in env:
        s = float(row["snr_db"])
        others = [float(t["mse"]) for t in table if float(t["snr_db"]) == s]
        assert len(others) == 3 and float(row["mse"]) <= min(others)
        assert row["nearest"] == "0"
    assert {p.name for p in out.iterdir()} >= {"zzb_5dB.json", "zzb_15dB.json", "zzb_25dB.json", "bank.json", "manifest.json"}


def test_adaptive_unconverged_entries_exit_2(tmp_path):
    code = run(
        "adaptive", "--snr-d-list", "20", *SMALL, "--max-iters", 1,
        "--snr-db-range", "10:1:10", "--trials", 20, "--out", tmp_path,
    )
    assert code == cli.EXIT_BUDGET
    assert json.loads((tmp_path / "manifest.json").read_text())["excluded"] == ["zzb_20dB"]


def test_adaptive_empty_list(tmp_path):
    assert run("adaptive", "--snr-d-list", ",", "--snr-db-range", "0:1:1", "--out", tmp_path) == cli.EXIT_USAGE


# ---------------------------------------------------------------- plot


def test_plot_mse_has_series_per_column(evaluated, tmp_path):
    svg = tmp_path / "mse.svg"
    assert run("plot", "mse", evaluated / "mse.csv", "--out", svg) == cli.EXIT_OK
    root = ET.parse(svg).getroot()
    # mse, zzb and crb for each of three waveforms; the tone CRB is finite too
    assert len(root.findall(f"{SVG}polyline")) == 9


def test_plot_cdf_and_acf(evaluated, designed, tmp_path):
    assert run("plot", "cdf", evaluated / "cdf.csv", "--out", tmp_path / "cdf.svg") == cli.EXIT_OK
    assert len(ET.parse(tmp_path / "cdf.svg").getroot().findall(f"{SVG}polyline")) == 3
    wf = designed / "zzb5" / "waveform.json"
    assert run("plot", "acf", wf, "--out", tmp_path / "acf.svg") == cli.EXIT_OK


def test_plot_psd_shifts_toward_band_edge(designed, tmp_path):
    lo = json.loads((designed / "zzb5" / "waveform.json").read_text())
    hi = json.loads((designed / "zzb25" / "waveform.json").read_text())

    def mean_index(doc):
        p = np.asarray(doc["spectrum"][: doc["b_dis"]])
        return float(np.arange(1, p.size + 1) @ p / p.sum())

    assert mean_index(hi) > mean_index(lo)
    svg = tmp_path / "psd.svg"
    assert run("plot", "psd", designed / "zzb5" / "waveform.json", designed / "zzb25" / "waveform.json", "--out", svg) == 0
    bars = [r for r in ET.parse(svg).getroot().findall(f"{SVG}rect") if r.get("fill") not in ("white", "none")]
    assert len(bars) == 16


def test_plot_bad_inputs(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert run("plot", "mse", empty, "--out", tmp_path / "x.svg") == cli.EXIT_USAGE
    nocol = tmp_path / "nocol.csv"
    nocol.write_text("snr_db,waveform_id\n1,a\n")
    assert run("plot", "mse", nocol, "--out", tmp_path / "x.svg") == cli.EXIT_USAGE
    assert "'mse'" in capsys.readouterr().err
    assert run("plot", "mse", tmp_path / "missing.csv", "--out", tmp_path / "x.svg") == cli.EXIT_USAGE
    assert not (tmp_path / "x.svg").exists()


# ---------------------------------------------------------------- replay


def test_replay_is_bit_identical(tmp_path):
    out = tmp_path / "d"
    assert run("design", "--snr-d-db", 12, *SMALL, "--out", out) == cli.EXIT_OK
    first = {p: (out / p).read_bytes() for p in ("waveform.json", "trace.csv")}
    assert run("replay", out / "manifest.json") == cli.EXIT_OK
    assert {p: (out / p).read_bytes() for p in first} == first

    ev = tmp_path / "e"
    assert run("eval", "--waveform", out / "waveform.json", *SMALL, "--snr-db-range", "5:5:15", "--trials", 100, "--out", ev) == 0
    before = (ev / "mse.csv").read_bytes()
    assert run("replay", ev / "manifest.json") == cli.EXIT_OK
    assert (ev / "mse.csv").read_bytes() == before


def test_replay_bad_manifest(tmp_path):
    (tmp_path / "m.json").write_text("{}")
    assert run("replay", tmp_path / "m.json") == cli.EXIT_USAGE


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "zzbwave", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("zzbwave ")


def test_plot_duplicate_ids_rejected(designed, tmp_path):
    wf = designed / "zzb5" / "waveform.json"
    assert run("plot", "acf", wf, wf, "--out", tmp_path / "a.svg") == cli.EXIT_USAGE
