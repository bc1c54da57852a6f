import json
import subprocess
import sys

import pytest

from mergedyn import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_enumerate(capsys):
    code, out, _ = run(capsys, "enumerate", "--n", "3")
    assert code == 0 and len(out.split()) == 6
    code, out, _ = run(capsys, "enumerate", "--n", "4", "--counts")
    doc = json.loads(out)
    assert code == 0 and doc["total"] == 36
    assert all(v["enumerated"] == v["predicted"] for v in doc["fibers"].values())


def test_graph_json_and_dot(capsys, tmp_path):
    path = tmp_path / "g.json"
    code, _, _ = run(capsys, "graph", "--n", "3", "--out", str(path))
    doc = json.loads(path.read_text())
    assert code == 0 and len(doc["vertices"]) == 6
    code, out, _ = run(capsys, "graph", "--n", "3", "--format", "dot")
    assert out.startswith("digraph")
    code, out, _ = run(capsys, "graph", "--labels", "x,y,z", "--kinds", "em")
    doc = json.loads(out)
    assert {e["kind"] for e in doc["edges"]} == {"EM"} and doc["labels"] == ["x", "y", "z"]


def test_exports_are_stable(capsys):
    first = run(capsys, "graph", "--n", "4")[1]
    second = run(capsys, "graph", "--n", "4")[1]
    assert first == second


def test_spectral_from_graph_file(capsys, tmp_path):
    path = tmp_path / "g.json"
    run(capsys, "graph", "--n", "4", "--out", str(path))
    code, out, _ = run(capsys, "spectral", "--graph", str(path))
    doc = json.loads(out)
    assert code == 0
    assert doc["lambda"] == pytest.approx(6.96561196206285, rel=1e-10)
    assert doc["normalization"] == "unit" and doc["residual"] < 1e-9


def test_spectral_partition_level(capsys):
    code, out, _ = run(capsys, "spectral", "--n", "4", "--level", "partition")
    assert code == 0 and json.loads(out)["lambda"] == pytest.approx(6.9656, abs=5e-4)


def test_project_writes_directory(capsys, tmp_path):
    code, _, _ = run(capsys, "project", "--n", "4", "--out", str(tmp_path / "proj"))
    assert code == 0
    kr = (tmp_path / "proj" / "KR.csv").read_text().splitlines()
    assert kr[0] == ",2+1+1,2+2,3+1,4"
    assert kr[1] == "2+1+1,4,1,2,0"
    rep = json.loads((tmp_path / "proj" / "p_symmetry.json").read_text())
    assert rep["p_symmetry"]["failing_fibers"] == ["4"]


def test_weight_and_tropical(capsys):
    code, out, _ = run(capsys, "weight", "--n", "4", "--cost", "total", "--t", "1", "--format", "csv")
    assert code == 0 and "2+1+1" in out
    code, out, _ = run(capsys, "tropical", "--n", "4", "--cost", "shannon")
    doc = json.loads(out)
    assert code == 0 and doc["critical"] == ["4"]
    code, out, _ = run(capsys, "tropical", "--n", "4", "--cost", "total")
    doc = json.loads(out)
    assert code == 0 and set(doc["exponents_by_root"]) == {"3+1", "4"}
    code, _, err = run(capsys, "weight", "--n", "4", "--cost", "fuel")
    assert code == 1 and "fuel" in err


def test_simulate_is_deterministic(capsys):
    args = ("simulate", "--n", "3", "--steps", "5000", "--burn-in", "10", "--seed", "1")
    first = run(capsys, *args)[1]
    second = run(capsys, *args, "--replicas", "1", "--workers", "2")[1]
    assert first == second
    assert first.splitlines()[0] == "vertex,frequency,exact,abs_error"


def test_contraction_check(capsys):
    code, out, _ = run(capsys, "contraction-check", "--n", "3")
    assert code == 0 and json.loads(out)["pass"] is True
    code, _, _ = run(capsys, "contraction-check", "--n", "6")
    assert code == 2


def test_verify_small_n(capsys, tmp_path):
    report = tmp_path / "r.json"
    code, out, _ = run(capsys, "verify", "--n", "3", "--report", str(report))
    assert code == 0
    assert out.count("criterion") == 16
    assert json.loads(report.read_text())["pass"] is True


def test_verify_forbid_reports_expected_fail(capsys):
    code, out, _ = run(capsys, "verify", "--n", "4", "--sister-cut", "forbid")
    assert "[XFAIL] criterion  5" in out
    # the fiber-constancy part of criterion 13 fails regardless of the flag
    assert "[FAIL] criterion 13" in out
    assert code == 1


def test_cap_errors(capsys, monkeypatch):
    assert run(capsys, "verify", "--n", "99")[0] == 2
    monkeypatch.setenv("MERGEDYN_CAP", "3")
    assert run(capsys, "graph", "--n", "4")[0] == 2
    assert run(capsys, "graph", "--n", "3")[0] == 0


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# small run\nn = 3\nformat=dot\n")
    code, out, _ = run(capsys, "graph", "--config", str(cfg))
    assert code == 0 and out.startswith("digraph") and out.count("label=") >= 6
    code, out, _ = run(capsys, "graph", "--config", str(cfg), "--n", "4", "--format", "json")
    assert len(json.loads(out)["vertices"]) == 36


def test_config_errors(capsys, tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour=blue\n")
    assert run(capsys, "graph", "--config", str(bad))[0] == 2
    bad.write_text("just words\n")
    assert run(capsys, "graph", "--config", str(bad))[0] == 2
    assert run(capsys, "graph", "--config", str(tmp_path / "missing.cfg"))[0] == 2


def test_config_round_trip(tmp_path):
    values = {"n": 5, "cost": "shannon", "t": 0.001, "seed": 9, "counts": True}
    path = tmp_path / "c.cfg"
    path.write_text(cli.write_config(values))
    back = {k: cli._coerce(k, v) for k, v in cli.read_config(path).items()}
    assert back == values


def test_usage_error_from_argparse():
    with pytest.raises(SystemExit) as info:
        cli.main(["graph", "--edge-mode", "weird"])
    assert info.value.code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "mergedyn", "enumerate", "--n", "3", "--counts"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)
