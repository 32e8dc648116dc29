import csv
import json
import subprocess
import sys

import pytest

from _oracles import fig2_reach
from pmdpsynth.cli import TRACE_HEADER, run
from pmdpsynth.io import bundled_model_path

MODEL = str(bundled_model_path())


def _run(capsys, *args):
    code = run(["--model", MODEL, *args])
    return code, capsys.readouterr()


def test_ccp_feasible(capsys, tmp_path):
    code, cap = _run(capsys, "--spec", "P<=0.1 [F target]", "--method", "ccp", "--out", str(tmp_path), "--trace",
                     "--oracle-check")
    assert code == 0
    doc = json.loads(cap.out)
    assert doc["outcome"] == "Feasible"
    assert doc["certified_value"] <= 0.1
    assert doc["certified_value"] == pytest.approx(float(fig2_reach(doc["valuation"]["v"])), abs=1e-12)
    assert doc["oracle_check"]["agree"]
    assert json.loads((tmp_path / "result.json").read_text()) == doc
    with open(tmp_path / "trace.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == TRACE_HEADER
    assert len(rows) - 1 == doc["iterations"]


def test_scp_not_found(capsys):
    code, cap = _run(capsys, "--spec", "P>=0.2 [F target]", "--method", "scp")
    assert code == 2
    doc = json.loads(cap.out)
    assert doc["outcome"] == "NotFound" and doc["valuation"] is None
    assert doc["certified_value"] is not None  # the last model-checking value is always reported


def test_missing_file(capsys, tmp_path):
    assert run(["--model", str(tmp_path / "nope.pmdp"), "--spec", "P<=0.1 [F target]"]) == 1
    assert "not found" in capsys.readouterr().err


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        run(["--model", MODEL])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        run(["--model", MODEL, "--spec", "P<=0.1 [F target]", "--method", "simplex"])
    assert info.value.code == 1
    assert run(["--model", MODEL, "--spec", "P<=0.1 [F nowhere]"]) == 1
    assert run(["--model", MODEL, "--spec", "P>=0.1 [F target]", "--method", "scp", "--gamma", "0.5"]) == 1


def test_deterministic_modulo_wall_time(capsys):
    docs = []
    for _ in range(2):
        code, cap = _run(capsys, "--spec", "P>=0.14 [F target]", "--method", "pso", "--seed", "4")
        doc = json.loads(cap.out)
        doc.pop("wall_time")
        docs.append(json.dumps(doc, sort_keys=True))
    assert docs[0] == docs[1]


def test_overrides_are_echoed(capsys):
    code, cap = _run(capsys, "--spec", "P>=0.14 [F target]", "--method", "scp", "--delta0", "3", "--gamma", "2",
                     "--omega", "1e-3", "--max-iters", "7", "--tau0", "100")
    cfg = json.loads(cap.out)["config"]
    assert (cfg["delta0"], cfg["gamma"], cfg["omega"], cfg["max_iters"], cfg["tau"]) == (3, 2, 1e-3, 7, 100)


def test_seed_fan_out(capsys, tmp_path):
    code, cap = _run(capsys, "--spec", "P>=0.14 [F target]", "--method", "pso", "--seeds", "2", "--out",
                     str(tmp_path), "--trace")
    doc = json.loads(cap.out)
    assert code == 0 and doc["seeds"] == [0, 1] and doc["feasible"] == 2
    assert [r["seed"] for r in doc["runs"]] == [0, 1]
    assert (tmp_path / "trace_seed1.csv").exists()


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "pmdpsynth.cli", "--model", MODEL, "--spec", "P>=0.2 [F target]",
                          "--method", "pso", "--max-iters", "5"], capture_output=True, text=True)
    assert out.returncode == 2
    assert json.loads(out.stdout)["reason"] == "IterationCap"
