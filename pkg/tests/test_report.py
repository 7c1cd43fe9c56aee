import json
import math

import numpy as np

from hagerlab.report import RunManifest, fmt, read_csv, sha256_file, write_csv, write_outputs


def test_floats_round_trip_losslessly(tmp_path):
    rng = np.random.default_rng(0)
    values = np.concatenate([rng.standard_normal(200) * 10.0 ** rng.integers(-300, 300, 200), [0.1, 1 / 3, math.pi]])
    write_csv(tmp_path / "v.csv", ["x"], [(v,) for v in values])
    _, rows = read_csv(tmp_path / "v.csv")
    assert np.array_equal(np.array([float(r[0]) for r in rows]), values)


def test_format_has_seventeen_digits():
    assert fmt(0.1) == "1.0000000000000001e-01"
    assert fmt(3) == "3" and fmt("ok") == "ok"


def test_unix_line_endings_and_stable_hash(tmp_path):
    rows = [(1, 0.5, "ok"), (2, -0.25, "noise_floor")]
    a = write_csv(tmp_path / "a.csv", ["i", "x", "flag"], rows)
    b = write_csv(tmp_path / "b.csv", ["i", "x", "flag"], rows)
    raw = (tmp_path / "a.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    assert a == b == sha256_file(tmp_path / "b.csv")


def test_manifest_lists_written_files(tmp_path):
    m = RunManifest(config={"h": 0.05}, seed=7, notes={"x": math.inf})
    write_outputs(tmp_path, m, spectra=[np.array([1 + 2j, 3 - 1j])], curves=[(0.0,) * 7])
    doc = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
    assert set(doc["files"]) == {"eigenvalues.csv", "curves.csv"}
    for name, digest in doc["files"].items():
        assert sha256_file(tmp_path / name) == digest
    assert doc["seed"] == 7 and doc["notes"]["x"] == "inf"
    header, rows = read_csv(tmp_path / "eigenvalues.csv")
    assert header == ["trial", "re", "im"]
    assert [float(v) for v in rows[1][1:]] == [3.0, -1.0]
