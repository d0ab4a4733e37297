import json

import numpy as np
import pytest

from bsplift import config, csvio, testdata
from bsplift import transform as T
from bsplift.errors import ConfigError, DataFormatError


def test_table_round_trip(tmp_path):
    p = tmp_path / "t.csv"
    x = np.array([0.1, 1 / 3, 2.0e-300])
    csvio.write_table(p, {"i": np.arange(3), "x": x})
    text = p.read_bytes()
    assert b"\r" not in text
    assert text.splitlines()[0] == b"i,x"
    back = csvio.read_table(p)
    np.testing.assert_array_equal(back["x"], x)
    np.testing.assert_array_equal(csvio.read_vector(p), x)


def test_bad_files(tmp_path):
    with pytest.raises(DataFormatError) as info:
        csvio.read_table(tmp_path / "missing.csv")
    assert "missing.csv" in str(info.value)
    p = tmp_path / "bad.csv"
    p.write_text("x\n1\nabc\n")
    with pytest.raises(DataFormatError):
        csvio.read_table(p)
    p.write_text("x,y\n1\n")
    with pytest.raises(DataFormatError):
        csvio.read_table(p)
    p.write_text("")
    with pytest.raises(DataFormatError):
        csvio.read_table(p)
    p.write_text("x\nnan\n")
    with pytest.raises(DataFormatError):
        csvio.read_table(p)


def test_pyramid_round_trip(tmp_path):
    x = np.sort(np.random.default_rng(0).uniform(size=65))
    t = T.build(T.grid_for(x, 3), 3)
    pyr = T.forward(t, np.cos(3 * x))
    p = tmp_path / "pyr.csv"
    csvio.write_pyramid(p, pyr)
    L, coarse, details = csvio.read_pyramid(p)
    assert L == t.L and [j for j, _ in details] == list(range(t.L, t.J))
    np.testing.assert_array_equal(coarse, pyr.coarse)
    for (_, d), want in zip(details, pyr.details):
        np.testing.assert_array_equal(d, want)


def test_json_report_is_sorted_and_versioned(tmp_path):
    p = tmp_path / "r.json"
    csvio.write_json(p, csvio.report("x", {"b": 1, "a": np.int64(2)}, {"v": np.array([1.0])}, {"total": 0.1}))
    data = json.loads(p.read_text(encoding="utf-8"))
    assert data["schema_version"] == csvio.SCHEMA_VERSION
    assert data["config"] == {"a": 2, "b": 1}
    assert set(data["versions"]) >= {"bsplift", "numpy", "scipy", "kernels"}
    text = p.read_text()
    assert text.index('"command"') < text.index('"config"')


def test_testdata_is_reproducible():
    a = testdata.generate("noisy-signal", 100, seed=5)
    b = testdata.generate("noisy-signal", 100, seed=5)
    np.testing.assert_array_equal(a["value"], b["value"])
    np.testing.assert_array_equal(a["x"], testdata.uniform_knots(100, 5))
    e = testdata.equispaced_knots(2048)
    assert np.diff(e) == pytest.approx(np.full(2047, 1 / 2047), abs=1e-15)
    with pytest.raises(ConfigError):
        testdata.generate("other", 10)


def test_signal_has_a_jump_and_a_kink():
    f = testdata.piecewise_smooth
    assert abs(f(0.4 - 1e-9) - f(0.4)) > 0.1
    assert f(0.7 - 1e-9) == pytest.approx(f(0.7), abs=1e-6)


def test_tolerance_file(tmp_path, monkeypatch):
    p = tmp_path / "tol.json"
    p.write_text(json.dumps({"pivot": 1e-10}))
    assert config.load_tolerances(p).pivot == 1e-10
    p.write_text(json.dumps({"nonsense": 1}))
    with pytest.raises(ConfigError):
        config.load_tolerances(p)
    p.write_text("{")
    with pytest.raises(ConfigError):
        config.load_tolerances(p)
    monkeypatch.setenv(config.ENV_VAR, str(tmp_path / "none.json"))
    with pytest.raises(ConfigError):
        config.load_tolerances()
