import csv
import json
import shutil
import subprocess
import sys

import pytest

from corrdecay.cli import main
from corrdecay.model import load_model
from corrdecay.oracle import integral_reference


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


def test_check_valid_model(capsys, models_dir):
    code, rep, err = run(capsys, "check", models_dir / "path3_table.json")
    assert code == 0
    res = rep["results"]
    assert (res["Delta"], res["eta"], res["R"]) == (2, 2, 2)
    assert res["window"] == pytest.approx(1.0416079149373914, abs=1e-12)
    assert res["admissible"] and len(res["per_edge"]) == 2


def test_check_wide_model_names_edge(capsys, models_dir):
    code, rep, err = run(capsys, "check", models_dir / "path3_exp_wide.json")
    assert code == 1
    assert "edge 0" in err
    assert not rep["results"]["per_edge"][0]["passed"]


def test_check_no_edges_warns(capsys, models_dir):
    code, rep, err = run(capsys, "check", models_dir / "no_edges.json")
    assert code == 0
    assert rep["results"]["Delta"] == 0
    assert "trivial product model" in err


def test_parse_errors_exit_3(capsys, write_model):
    code, _, err = run(capsys, "check", write_model('{"vertices": 2,\n "N": }'))
    assert code == 3 and "line 2" in err
    code, _, err = run(capsys, "oracle", write_model({"vertices": 2, "N": 2, "edges": [{"vertices": [0, 9]}]}))
    assert code == 3 and "edges[0].vertices[1]" in err
    code, _, _ = run(capsys, "check", "/nonexistent/model.json")
    assert code == 3


def test_oracle(capsys, models_dir):
    path = models_dir / "path3_table.json"
    code, rep, _ = run(capsys, "oracle", path)
    assert code == 0 and rep["results"]["z"] == pytest.approx(8.0401, abs=1e-12)
    code, rep, _ = run(capsys, "oracle", path, "--beta", "1=0", "--marginals")
    assert rep["results"]["z"] == pytest.approx(4.0, abs=1e-14)
    assert set(rep["results"]["marginals"]) == {"0", "2"}
    code, _, err = run(capsys, "oracle", path, "--budget", "4")
    assert code == 2 and "2^3 = 8" in err
    code, _, _ = run(capsys, "oracle", path, "--beta", "1=5")
    assert code == 3


def test_estimate_z(capsys, models_dir):
    code, rep, _ = run(capsys, "estimate-z", models_dir / "path3_table.json", "--depth", "3")
    assert code == 0 and rep["results"]["z"] == pytest.approx(8.0401, abs=1e-9)
    code, rep, _ = run(capsys, "estimate-z", models_dir / "path3_table.json", "--delta", "auto")
    assert rep["parameters"]["delta"] == pytest.approx(0.29277370, abs=1e-7)
    assert rep["parameters"]["depth"] >= 1
    code, rep, _ = run(capsys, "estimate-z", models_dir / "constant.json", "--cache", "on")
    assert rep["results"]["log_z"] == pytest.approx(4 * 1.0986122886681098, abs=1e-12)
    code, _, _ = run(capsys, "estimate-z", models_dir / "path3_exp_wide.json")
    assert code == 1


def test_estimate_z_feasibility_guard(capsys, write_model):
    n = 14
    edges = [{"vertices": [i, j], "potential": {"family": "exp-bilinear", "c": 1, "epsilon": 0.001}}
             for i in range(n) for j in range(i + 1, n) if j - i in (1, 2, 3)]
    path = write_model({"vertices": n, "N": 3, "delta": "auto", "edges": edges})
    code, _, err = run(capsys, "estimate-z", path)
    assert code == 2 and "predicted" in err and "--force" in err


def test_estimate_integral(capsys, models_dir):
    code, rep, _ = run(capsys, "estimate-integral", models_dir / "no_edges.json")
    assert code == 0 and rep["results"]["value"] == pytest.approx(1.0)
    code, rep, _ = run(capsys, "estimate-integral", models_dir / "path3_exp.json", "--N", "4")
    lo, hi = rep["results"]["interval"]
    q = integral_reference(load_model(models_dir / "path3_exp.json"), 32).value
    assert q == pytest.approx(1.0203151249626103, abs=1e-9)
    assert lo <= q <= hi
    assert rep["parameters"]["N"] == 4 and rep["parameters"]["k"] > 0
    code, _, _ = run(capsys, "estimate-integral", models_dir / "path3_table.json")
    assert code == 1


def test_compare_and_csv(capsys, models_dir, tmp_path):
    out = tmp_path / "rows.csv"
    code, rep, _ = run(capsys, "compare", models_dir / "path3_table.json", "--max-depth", "5", "--csv", out)
    assert code == 0 and rep["results"]["envelope_respected"]
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    marg = [r for r in rows if r["kind"] == "marginal"]
    assert len(marg) == 6 * 3 * 2
    assert all(float(r["abs_error"]) <= float(r["bound"]) + 1e-12 for r in marg)
    code, rep, _ = run(capsys, "compare", models_dir / "constant.json", "--max-depth", "3")
    assert all(s["max_abs_error"] < 1e-15 for s in rep["results"]["per_depth"][1:])


def test_compare_refuses_large_models(capsys, write_model):
    path = write_model({"vertices": 30, "N": 2, "edges": []})
    code, _, err = run(capsys, "compare", path)
    assert code == 2 and "estimate-z" in err


def test_reports_are_reproducible(capsys, models_dir):
    def strip(rep):
        rep.pop("wall_seconds", None)
        return json.dumps(rep, sort_keys=True)

    for argv in (
        ("estimate-z", models_dir / "hyper_cycle.json", "--depth", "3"),
        ("estimate-z", models_dir / "hyper_cycle.json", "--depth", "3", "--threads", "4"),
        ("estimate-integral", models_dir / "path3_exp.json", "--N", "4"),
        ("compare", models_dir / "path3_table.json", "--max-depth", "3"),
        ("oracle", models_dir / "path3_table.json"),
    ):
        _, a, _ = run(capsys, *argv)
        _, b, _ = run(capsys, *argv)
        assert strip(a) == strip(b)
    _, one, _ = run(capsys, "estimate-z", models_dir / "hyper_cycle.json", "--depth", "3")
    _, four, _ = run(capsys, "estimate-z", models_dir / "hyper_cycle.json", "--depth", "3", "--threads", "4")
    assert one["results"] == four["results"]


def test_report_keys_are_sorted(models_dir):
    exe = shutil.which("corrdecay")
    cmd = [exe] if exe else [sys.executable, "-m", "corrdecay.cli"]
    out = subprocess.run(cmd + ["oracle", str(models_dir / "path3_table.json")], capture_output=True, text=True)
    assert out.returncode == 0
    assert out.stdout == json.dumps(json.loads(out.stdout), sort_keys=True, indent=2) + "\n"
    assert "Z(G, beta)" in out.stderr
