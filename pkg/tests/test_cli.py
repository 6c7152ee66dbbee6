import csv
import io
import json
import subprocess
import sys

import pytest

from qcurv.cli import main

DEPOL = {"kind": "pauli", "n": 1, "terms": [
    {"string": "I", "weight": 0.75}, {"string": "X", "weight": 0.25 / 3},
    {"string": "Y", "weight": 0.25 / 3}, {"string": "Z", "weight": 0.25 / 3}]}


def run(tmp_path, task, spec, *extra):
    p = tmp_path / "spec.json"
    p.write_text(json.dumps(spec))
    out = tmp_path / "out.txt"
    code = main([task, "--spec", str(p), "--out", str(out), *extra])
    return code, out.read_text() if out.exists() else None


def test_curvature_depolarizing(tmp_path):
    code, text = run(tmp_path, "curvature", {"channel": DEPOL, "budget": 2})
    assert code == 0
    rep = json.loads(text)
    assert rep["version"] and rep["task"] == "curvature" and rep["seed"] == 0
    assert rep["result"]["factor_upper"] == pytest.approx(5 / 6, abs=1e-12)
    assert rep["result"]["factor_lower"] == pytest.approx(2 / 3, abs=1e-9)


def test_bare_channel_spec(tmp_path):
    code, text = run(tmp_path, "gap", DEPOL)
    assert code == 0
    assert json.loads(text)["result"]["gap"] == pytest.approx(1 / 3)


def test_wasserstein_identical_states(tmp_path):
    st = [[0.5, 0], [0, 0.5]]
    spec = {"metric": {"metric": "w1", "seminorm": {"variant": "commutator_max", "generators": ["Z"]}},
            "states": [st, st]}
    code, text = run(tmp_path, "wasserstein", spec)
    assert code == 0
    assert json.loads(text)["result"]["value"] == 0


def test_wasserstein_infinite_serialization(tmp_path):
    spec = {"metric": {"metric": "w1", "seminorm": {"variant": "commutator_max", "generators": ["Z"]}},
            "states": [[[1, 0], [0, 0]], [[0, 0], [0, 1]]]}
    code, text = run(tmp_path, "wasserstein", spec)
    assert code == 0
    assert "Infinity" not in text
    assert json.loads(text)["result"] == {"status": "infinite"}


def test_coupling(tmp_path):
    spec = {"metric": {"metric": "coupling", "cost": "singlet_projector"},
            "states": [[[1, 0], [0, 0]], [[0, 0], [0, 1]]]}
    code, text = run(tmp_path, "wasserstein", spec)
    assert code == 0
    assert json.loads(text)["result"]["value"] == pytest.approx(0.5, abs=1e-7)


def test_mixing_csv_bose(tmp_path):
    spec = {"channel": {"kind": "bose_beam_splitter", "lambda": 0.5, "cutoff": 10}}
    code, text = run(tmp_path, "mixing", spec, "--steps", "6", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(text)))
    assert [int(r["n"]) for r in rows] == list(range(1, 7))
    bounds = [float(r["bound"]) for r in rows]
    assert all(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:]))
    assert all(float(r["measured"]) <= float(r["bound"]) for r in rows)


def test_intertwine_and_certify(tmp_path):
    code, text = run(tmp_path, "intertwine", {"channel": DEPOL})
    assert code == 0 and json.loads(text)["result"]["residual"] <= 1e-12
    code, text = run(tmp_path, "certify-tc", {"channel": {"kind": "site_replacement", "dims": [2, 2]},
                                              "num_states": 2})
    assert code == 0 and json.loads(text)["result"]["ok"]
    code, text = run(tmp_path, "certify-ti", {"channel": {"kind": "depolarizing_semigroup"},
                                              "num_states": 2})
    assert code == 0 and json.loads(text)["result"]["ok"]


def test_spec_error_pointer(tmp_path, capsys):
    bad = {"channel": {"kind": "pauli", "n": 1, "terms": [{"string": "I", "weight": 0.5},
                                                          {"string": "X", "weight": 0.4}]}}
    code, text = run(tmp_path, "curvature", bad)
    assert code == 1 and text is None
    err = json.loads(capsys.readouterr().err)
    assert err["pointer"] == "/channel/terms"


def test_bare_spec_pointer(tmp_path, capsys):
    code, _ = run(tmp_path, "gap", {"kind": "pauli", "n": 1, "terms": [{"string": "Q", "weight": 1}]})
    assert code == 1
    assert json.loads(capsys.readouterr().err)["pointer"] == "/terms/0/string"


def test_usage_errors(tmp_path, capsys):
    assert main(["curvature"]) == 1
    assert main(["nosuchtask", "--spec", "x"]) == 1
    assert main(["curvature", "--spec", str(tmp_path / "missing.json")]) == 1
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert main(["curvature", "--spec", str(p)]) == 1


def test_determinism(tmp_path):
    spec = {"channel": {"kind": "pauli", "n": 2, "terms": [{"string": "II", "weight": 0.7},
                                                         {"string": "XZ", "weight": 0.3}]},
            "budget": 3}
    a = run(tmp_path, "curvature", spec, "--seed", "3")[1]
    b = run(tmp_path, "curvature", spec, "--seed", "3")[1]
    assert a == b


def test_console_entry_point(tmp_path):
    p = tmp_path / "spec.json"
    p.write_text(json.dumps(DEPOL))
    r = subprocess.run([sys.executable, "-m", "qcurv.cli", "gap", "--spec", str(p)],
                       capture_output=True, text=True, check=False)
    assert r.returncode == 0
    assert json.loads(r.stdout)["task"] == "gap"
