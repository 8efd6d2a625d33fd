import json

import numpy as np
import pytest

from atomchip_sta.io import RunManifest, file_hash, read_csv, write_csv, write_json


def test_csv_format(tmp_path):
    p = write_csv(tmp_path / "a.csv", ["t_s", "x_m"], [np.array([0.0, 1e-3]), np.array([1.5, -2.0])])
    raw = p.read_bytes()
    assert raw == b"t_s,x_m\n0.000000000e+00,1.500000000e+00\n1.000000000e-03,-2.000000000e+00\n"
    header, data = read_csv(p)
    assert header == ["t_s", "x_m"]
    np.testing.assert_array_equal(data, [[0.0, 1.5], [1e-3, -2.0]])


def test_csv_deterministic(tmp_path):
    rng = np.random.default_rng(3)
    cols = [rng.normal(size=50) for _ in range(3)]
    a = write_csv(tmp_path / "a.csv", ["a", "b", "c"], cols)
    b = write_csv(tmp_path / "b.csv", ["a", "b", "c"], cols)
    assert file_hash(a) == file_hash(b)


def test_csv_header_mismatch(tmp_path):
    with pytest.raises(ValueError):
        write_csv(tmp_path / "a.csv", ["a"], [np.zeros(2), np.zeros(2)])
    assert not list(tmp_path.iterdir())


def test_json_numpy_and_nan(tmp_path):
    p = write_json(tmp_path / "s.json", {"b": np.float64(1.5), "a": np.arange(3), "n": float("nan"),
                                         "flag": np.bool_(True)})
    obj = json.loads(p.read_text(encoding="utf-8"))
    assert obj == {"a": [0, 1, 2], "b": 1.5, "n": None, "flag": True}
    assert list(obj) == sorted(obj)


def test_manifest(tmp_path):
    m = RunManifest(subcommand="x", flags={"k": 1}, inputs_si={"t_s": 1e-3}, config_path="c", config_hash="h")
    m.add(tmp_path / "out.csv")
    path = m.write(tmp_path)
    obj = json.loads(path.read_text())
    assert obj["outputs"] == ["out.csv"]
    assert obj["finished"] >= obj["started"]
    assert obj["inputs_si"] == {"t_s": 1e-3}
    assert not [f for f in tmp_path.iterdir() if f.name.endswith(".tmp")]
