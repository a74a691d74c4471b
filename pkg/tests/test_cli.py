import json
import shutil
import subprocess
import sys

import pytest

from curliso import gseig
from curliso.cli import main
from oracles import tan_root


def run(args, out):
    return main([*args, "--out-dir", str(out)])


def load(path):
    return json.loads(path.read_text())


def test_criterion_verdicts(tmp_path, fixtures_dir):
    assert run(["criterion", "--input", str(fixtures_dir / "rectangle.json"), "--svg"], tmp_path) == 0
    rep = load(tmp_path / "criterion.json")
    assert rep["result"]["verdict"] == "not_optimal_length"
    assert rep["format_version"] == 1 and rep["tool"] == "curliso"
    assert len(rep["input_sha256"]) == 64
    assert (tmp_path / "criterion.svg").read_text().startswith("<svg")
    assert run(["criterion", "--input", str(fixtures_dir / "axis_touching.json")], tmp_path) == 0
    assert load(tmp_path / "criterion.json")["result"]["verdict"] == "not_optimal_axis"


def test_truncated_json_exit_2(tmp_path, fixtures_dir, capsys):
    text = (fixtures_dir / "torus.json").read_bytes()
    bad = tmp_path / "bad.json"
    bad.write_bytes(text[:200])
    assert run(["criterion", "--input", str(bad)], tmp_path) == 2
    err = capsys.readouterr().err
    assert "byte offset 200" in err


def test_missing_input_exit_3(tmp_path):
    assert run(["solve", "--input", str(tmp_path / "nope.json")], tmp_path) == 3


def test_unknown_config_key_exit_3(tmp_path, fixtures_dir):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"h": 0.1, "bogus": 1}))
    assert run(["solve", "--config", str(cfg), "--input", str(fixtures_dir / "torus.json")], tmp_path) == 3


def test_bad_tolerance_exit_3(tmp_path, fixtures_dir):
    assert run(["solve", "--input", str(fixtures_dir / "torus.json"), "--h", "-0.1"], tmp_path) == 3


def test_bad_flag_is_parse_error(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["solve", "--h", "abc"])
    assert info.value.code == 2


def test_solve_ball(tmp_path, fixtures_dir):
    assert run(["solve", "--input", str(fixtures_dir / "ball.json"), "--h", "0.05", "--svg"], tmp_path) == 0
    rep = load(tmp_path / "solve.json")
    lam = rep["result"]["lambda_plus"]
    assert abs(lam - tan_root()) / tan_root() < 0.02
    assert rep["config"]["h"] == 0.05
    header = (tmp_path / "psi.csv").read_text().splitlines()[0]
    assert header == "r,z,tag,psi"
    assert (tmp_path / "psi.svg").exists()


def test_solve_deterministic(tmp_path, fixtures_dir):
    args = ["solve", "--input", str(fixtures_dir / "torus.json"), "--h", "0.08", "--svg"]
    assert run(args, tmp_path) == 0
    first = {n: (tmp_path / n).read_bytes() for n in ("solve.json", "solution.json", "psi.csv", "psi.svg")}
    assert run(args, tmp_path) == 0
    for name, data in first.items():
        assert (tmp_path / name).read_bytes() == data, name


def test_solve_holed_exit_3(tmp_path, fixtures_dir, capsys):
    assert run(["solve", "--input", str(fixtures_dir / "holed_torus.json"), "--h", "0.1"], tmp_path) == 3
    assert "multiply-connected cross-sections unsupported" in capsys.readouterr().err


def test_solve_nonconvergence_exit_4(tmp_path, fixtures_dir, monkeypatch, capsys):
    def stuck(*a, **kw):
        raise gseig.ConvergenceError("eigensolver did not converge", 0.25)

    monkeypatch.setattr("curliso.cli.solve_smallest", stuck)
    assert run(["solve", "--input", str(fixtures_dir / "torus.json"), "--h", "0.1"], tmp_path) == 4
    assert "residual" in capsys.readouterr().err


def test_diagnose_from_solution_and_cross_section(tmp_path, fixtures_dir):
    sol_dir = tmp_path / "s"
    assert run(["solve", "--input", str(fixtures_dir / "torus.json"), "--h", "0.05"], sol_dir) == 0
    assert run(["diagnose", "--input", str(sol_dir / "solution.json"), "--svg"], tmp_path) == 0
    res = load(tmp_path / "diagnose.json")["result"]
    assert res["flux_balance"] < 1e-6
    assert res["g_XR_deviation"] < 1e-10
    assert (tmp_path / "speed.svg").exists()
    assert run(["diagnose", "--input", str(fixtures_dir / "ball.json"), "--h", "0.05"], tmp_path) == 0
    res = load(tmp_path / "diagnose.json")["result"]
    assert res["constancy_score"] > 0.9
    assert res["flux_balance"] is None


def test_diagnose_holed_exit_3(tmp_path, fixtures_dir):
    assert run(["diagnose", "--input", str(fixtures_dir / "holed_torus.json"), "--h", "0.1"], tmp_path) == 3


def test_sweep_fixtures(tmp_path, fixtures_dir):
    for name in ("sweep_torus_center", "sweep_scale"):
        out = tmp_path / name
        assert run(["sweep", "--input", str(fixtures_dir / f"{name}.json"), "--h", "0.1", "--svg"], out) == 0
        rows = load(out / "sweep.json")["result"]["rows"]
        assert len(rows) >= 3
        assert (out / "sweep.csv").read_text().startswith("parameter,")
    objs = [r["objective"] for r in load(tmp_path / "sweep_scale" / "sweep.json")["result"]["rows"]]
    assert max(objs) - min(objs) < 1e-10 * objs[0]


def test_sweep_bad_family_exit_3(tmp_path):
    fam = tmp_path / "fam.json"
    fam.write_text(json.dumps({"kind": "torus_center", "radius": 0.5, "centers": [2, 3], "extra": 1}))
    assert run(["sweep", "--input", str(fam)], tmp_path) == 3


def test_verify_model(tmp_path, capsys):
    assert run(["verify-model"], tmp_path) == 0
    rep = load(tmp_path / "verify-model.json")
    assert rep["result"]["passed"] and rep["result"]["failed"] == []
    passes = {c["name"]: c["passed"] for c in rep["result"]["checks"]}
    assert run(["verify-model", "--seed", "12345"], tmp_path) == 0
    again = {c["name"]: c["passed"] for c in load(tmp_path / "verify-model.json")["result"]["checks"]}
    assert again == passes
    capsys.readouterr()
    assert run(["verify-model", "--wrong-potential"], tmp_path) == 5
    assert "concircular_residual" in capsys.readouterr().err


def test_mesh_info(tmp_path, fixtures_dir):
    assert run(["mesh-info", "--input", str(fixtures_dir / "d_shape.json"), "--h", "0.1", "--svg"], tmp_path) == 0
    res = load(tmp_path / "mesh-info.json")["result"]
    assert res["n_vertices"] > 0
    assert (tmp_path / "mesh.txt").exists() and (tmp_path / "mesh.svg").exists()


@pytest.mark.skipif(shutil.which("curliso") is None, reason="console script not installed")
def test_console_script(tmp_path, fixtures_dir):
    proc = subprocess.run(["curliso", "criterion", "--input", str(fixtures_dir / "rectangle.json"),
                           "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "not_optimal_length" in proc.stdout


def test_module_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "curliso.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "curliso" in proc.stdout
