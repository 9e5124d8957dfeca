import json
import subprocess
import sys

import pytest

from kkconformal import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    doc = json.loads(out.out) if out.out else None
    return code, doc, out.err


def test_curvature_flat(capsys):
    code, doc, _ = run(capsys, "curvature", "--model", "flat", "--dim", "4", "--points", "5")
    assert code == 0 and doc["verdict"] == "pass"
    for conv in ("paper", "standard"):
        weyl = next(i for i in doc["runs"][conv]["invariants"] if i["name"] == "max_weyl")
        assert weyl["value"] <= 1e-13


def test_curvature_sphere_scalar(capsys):
    code, doc, _ = run(capsys, "curvature", "--model", "sphere", "--dim", "3", "--scalar", "6", "--points", "5")
    assert code == 0
    assert all(abs(abs(r["scalar"]) - 6) <= 1e-9 for r in doc["runs"]["paper"]["points"])
    assert doc["runs"]["paper"]["points"][0]["scalar"] < 0 < doc["runs"]["standard"]["points"][0]["scalar"]


@pytest.mark.parametrize("model", ["hyperbolic", "qk-space-form", "hopf-instanton", "trivial"])
def test_curvature_catalog_passes(capsys, model):
    code, doc, _ = run(capsys, "curvature", "--model", model, "--points", "3")
    assert code == 0, doc["runs"]["paper"]["invariants"]


@pytest.mark.parametrize("argv", [
    ["curvature", "--model", "sphere", "--dim", "3", "--scalar", "-1"],
    ["curvature", "--model", "torus"],
    ["curvature", "--model", "flat", "--points", "0"],
    ["verify", "all", "--model", "trivial", "--detune-internal-radius", "1.1"],
    ["verify", "qk", "--model", "trivial"],
    ["verify", "flatness", "--spec", "/nonexistent/spec.json"],
    ["verify", "flatness", "--seed", "-3"],
    [],
])
def test_configuration_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert "kkconformal" in err or "usage" in err


def test_domain_error_exit_3(capsys, tmp_path):
    path = tmp_path / "degenerate.json"
    path.write_text(json.dumps({"external": {"polynomial": {"constant": [[0.0, 0.0], [0.0, 0.0]]}},
                                "internal": {"kind": "s3"}}))
    code, _, err = run(capsys, "verify", "flatness", "--spec", str(path), "--points", "2")
    assert code == 3 and "domain error" in err


def test_detuned_flatness_fails(capsys):
    code, doc, _ = run(capsys, "verify", "flatness", "--model", "hopf-instanton",
                       "--detune-internal-radius", "1.1", "--points", "4", "--convention", "paper")
    assert code == 1
    eqs = {e["tag"]: e for e in doc["suites"]["flatness"]["runs"]["paper"]["equations"]}
    assert max(eqs["W-8b"]["max_rel"], eqs["W-8h"]["max_rel"]) >= 1e-3


def test_trivial_verify_passes(capsys):
    code, doc, _ = run(capsys, "verify", "all", "--model", "trivial", "--points", "3")
    assert code == 0, doc["verdict"]
    assert "qk" not in doc["suites"]
    assert "convention_comparison" in doc["suites"]["flatness"]


def test_reduction_random_report(capsys):
    code, doc, _ = run(capsys, "verify", "reduction", "--spec", "random", "--seed", "3", "--points", "2",
                       "--convention", "paper")
    eqs = {e["tag"]: e for e in doc["suites"]["reduction"]["runs"]["paper"]["equations"]}
    assert all(eqs[t + "'"]["passed"] for t in ("B.Ricci", "B.6th", "A.Cmunuk", "A.Cmunukappa", "A.Cinukappa"))
    assert all(e["passed"] for t, e in eqs.items() if e["applicable"] and e["in_verdict"] and t not in
               ("B.Ricci", "B.6th", "A.Cmunuk", "A.Cmunukappa", "A.Cinukappa"))
    assert code == 1  # the printed forms of the five formulas above disagree


def test_body_is_deterministic(tmp_path, capsys):
    outs = []
    for k in range(2):
        path = tmp_path / f"r{k}.json"
        assert cli.main(["verify", "integrability", "--model", "hopf-instanton", "--points", "3", "--seed", "7",
                         "--out", str(path)]) in (0, 1)
        outs.append(json.loads(path.read_text()))
    assert "metadata" in outs[0]
    assert cli.dumps(cli.report_body(outs[0])) == cli.dumps(cli.report_body(outs[1]))


def test_json_helpers():
    import numpy as np
    assert cli._jsonable({"a": np.float64("nan"), "b": np.arange(2), "c": np.bool_(True)}) == \
        {"a": "nan", "b": [0, 1], "c": True}


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "kkconformal.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "0.1.0" in res.stdout
