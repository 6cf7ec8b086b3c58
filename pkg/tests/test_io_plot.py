import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from zzbwave.io import (
    MSE_COLUMNS,
    FileFormatError,
    WaveformFile,
    load_waveform,
    read_csv,
    save_waveform,
    write_csv,
)
from zzbwave.plot import Series, bar_chart, line_chart
from zzbwave.spectrum import AcfVector, Grid, dct4, make_sinc_acf

SVG = "{http://www.w3.org/2000/svg}"


def test_waveform_round_trip_is_exact(tmp_path):
    g = Grid(300, 2.0)
    r = make_sinc_acf(g, 17)
    rng = np.random.default_rng(0)
    noisy = r.r + 1e-3 * rng.standard_normal(300)  # arbitrary doubles
    wf = WaveformFile(AcfVector(g, noisy), 17, 13.0, {"objective": 0.25, "iterations": 4, "converged": True})
    path = save_waveform(tmp_path / "w.json", wf)
    back = load_waveform(path)
    assert np.array_equal(back.acf.r, noisy)
    assert back.grid == g and back.b_dis == 17 and back.snr_d_db == 13.0
    assert back.meta == {"objective": 0.25, "iterations": 4, "converged": True}
    doc = json.loads(path.read_text())
    assert doc["version"] == 1 and doc["n"] == 300
    np.testing.assert_allclose(doc["spectrum"], dct4(noisy), atol=1e-15)


def test_benchmark_has_null_design_snr(tmp_path):
    wf = WaveformFile(make_sinc_acf(Grid(10, 1.0), 3), 3)
    back = load_waveform(save_waveform(tmp_path / "s.json", wf))
    assert back.snr_d_db is None and back.meta == {}


@pytest.mark.parametrize(
    "doc",
    [
        "not json",
        "[1, 2]",
        '{"version": 1, "n": 3}',
        '{"version": 2, "n": 2, "eps_max": 1, "b_dis": 1, "r": [1, 0]}',
        '{"version": 1, "n": 3, "eps_max": 1, "b_dis": 1, "r": [1, 0]}',
    ],
)
def test_bad_waveform_files(tmp_path, doc):
    p = tmp_path / "bad.json"
    p.write_text(doc)
    with pytest.raises(FileFormatError):
        load_waveform(p)


def test_csv_round_trip(tmp_path):
    rows = [(10.0, "sinc", np.float64(0.1), 0.05, 0.15, 100, 7)]
    p = write_csv(tmp_path / "m.csv", MSE_COLUMNS, rows)
    back = read_csv(p, MSE_COLUMNS)
    assert float(back[0]["mse"]) == 0.1 and back[0]["waveform_id"] == "sinc"
    assert p.read_text().splitlines()[0] == ",".join(MSE_COLUMNS)


def test_csv_schema_errors(tmp_path):
    (tmp_path / "e.csv").write_text("")
    with pytest.raises(FileFormatError, match="empty"):
        read_csv(tmp_path / "e.csv")
    (tmp_path / "h.csv").write_text("a,b\n")
    with pytest.raises(FileFormatError, match="no data"):
        read_csv(tmp_path / "h.csv")
    (tmp_path / "c.csv").write_text("a,b\n1,2\n")
    with pytest.raises(FileFormatError, match="'mse'"):
        read_csv(tmp_path / "c.csv", ["a", "mse"])


def test_line_chart_is_valid_svg():
    svg = line_chart(
        {"mse": Series([10, 20, 30], [1e-2, 1e-4, 1e-6]), "zzb": Series([10, 20, 30], [5e-3, 5e-5, 0.0])},
        "t",
        "SNR",
        "MSE",
        logy=True,
    )
    root = ET.fromstring(svg)
    lines = root.findall(f"{SVG}polyline")
    assert len(lines) == 2
    # the zero is dropped on the log axis
    assert len(lines[1].get("points").split()) == 2


def test_bar_chart_and_errors():
    svg = bar_chart({"a": Series([1, 2, 3], [0.2, 0.5, 0.3]), "b": Series([1, 2, 3], [0.1, 0.1, 0.8])})
    root = ET.fromstring(svg)
    assert len([r for r in root.findall(f"{SVG}rect") if r.get("fill") not in ("white", "none")]) == 6
    with pytest.raises(ValueError):
        line_chart({})
    with pytest.raises(ValueError):
        line_chart({"a": Series([1.0], [0.0])}, logy=True)
