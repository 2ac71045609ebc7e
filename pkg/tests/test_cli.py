"""End-to-end command line flows: solve, verify, oracle, sweep."""

import json
import os

import pytest

from cvp.cli import main

EL_TOL = 1e-8


def write_config(tmp_path, name="config.json", **overrides):
    points = [{"id": f"g{i}", "coords": [float(i)]} for i in range(-6, 7)]
    cfg = {
        "space": {"points": points, "metric": "euclidean"},
        "kernel": {"kind": "tent", "amplitude": 1.0, "range": 1.0},
        "exhaustion": {"center": "g0", "radii": [2, 4, 6]},
        "solver": {"restarts": 4, "certify": False},
        "seed": 0,
        "verify": {"checks": ["el", "minimality"], "trials": 200},
    }
    cfg.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def run_solve(tmp_path, out="run", **overrides):
    cfg = write_config(tmp_path, **overrides)
    out_dir = str(tmp_path / out)
    code = main(["solve", "--config", cfg, "--out", out_dir])
    assert code == 0
    return out_dir


def test_solve_writes_report_and_stage_csv(tmp_path, capsys):
    out_dir = run_solve(tmp_path)
    report = json.loads(open(os.path.join(out_dir, "run.json")).read())
    assert report["tool"]["name"] == "cvp"
    assert len(report["stages"]) == 3
    assert report["diagnostics"]["stabilized"] is True
    assert [round(s["lambda"]) for s in report["stages"]] == [5, 9, 13]
    for i in range(3):
        csv_path = os.path.join(out_dir, f"stage_{i}.csv")
        assert os.path.exists(csv_path)
        header = open(csv_path).readline().strip()
        assert header == "point,ell,weight"
    out = capsys.readouterr().out
    assert "solved 3 stages" in out


def test_solve_is_byte_deterministic(tmp_path):
    a = run_solve(tmp_path, out="run_a")
    b = run_solve(tmp_path, out="run_b")
    bytes_a = open(os.path.join(a, "run.json"), "rb").read()
    bytes_b = open(os.path.join(b, "run.json"), "rb").read()
    assert bytes_a == bytes_b


def test_seed_flag_changes_config_hash(tmp_path):
    a = run_solve(tmp_path, out="run_a")
    cfg = write_config(tmp_path)
    out_b = str(tmp_path / "run_b")
    assert main(["solve", "--config", cfg, "--out", out_b, "--seed", "7"]) == 0
    ha = json.loads(open(os.path.join(a, "run.json")).read())["config_hash"]
    hb = json.loads(open(os.path.join(out_b, "run.json")).read())["config_hash"]
    assert ha != hb


def test_verify_passes_on_clean_run(tmp_path, capsys):
    out_dir = run_solve(tmp_path)
    code = main(["verify", "--run", os.path.join(out_dir, "run.json")])
    assert code == 0
    summary = json.loads(open(os.path.join(out_dir, "verify.json")).read())
    assert summary["failed"] == []
    assert set(summary["checks"]) == {"el", "minimality"}
    out = capsys.readouterr().out
    assert "el: passed" in out and "minimality: passed" in out


def test_verify_el_failure_exits_2(tmp_path):
    out_dir = run_solve(tmp_path)
    run_path = os.path.join(out_dir, "run.json")
    report = json.loads(open(run_path).read())
    key = next(iter(report["stages"][-1]["weights"]))
    report["stages"][-1]["weights"][key] *= 2.0
    open(run_path, "w").write(json.dumps(report))
    assert main(["verify", "--run", run_path, "--checks", "el"]) == 2


def test_verify_minimality_witness_exits_3(tmp_path):
    out_dir = run_solve(tmp_path)
    run_path = os.path.join(out_dir, "run.json")
    report = json.loads(open(run_path).read())
    key = next(iter(report["stages"][-1]["weights"]))
    report["stages"][-1]["weights"][key] *= 2.0
    open(run_path, "w").write(json.dumps(report))
    assert main(["verify", "--run", run_path, "--checks", "minimality",
                 "--trials", "1000"]) == 3


def test_verify_condition_failure_exits_4(tmp_path):
    points = [{"id": f"t{i}", "coords": [i * 0.25]} for i in range(9)]
    out_dir = run_solve(
        tmp_path,
        space={"points": points, "metric": "euclidean"},
        exhaustion={"center": "t0", "radii": [1.0, 2.0]},
    )
    code = main(["verify", "--run", os.path.join(out_dir, "run.json"),
                 "--checks", "conditions", "--delta-cover", "1.0"])
    assert code == 4


def test_verify_rejects_unknown_check(tmp_path):
    out_dir = run_solve(tmp_path)
    assert main(["verify", "--run", os.path.join(out_dir, "run.json"),
                 "--checks", "nonsense"]) == 64


def test_verify_rejects_zero_trials(tmp_path):
    out_dir = run_solve(tmp_path)
    assert main(["verify", "--run", os.path.join(out_dir, "run.json"),
                 "--trials", "0"]) == 64


def test_missing_config_exits_1(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "o")]) == 1


def test_malformed_config_exits_1(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["solve", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1


def test_nonincreasing_radii_rejected(tmp_path):
    cfg = write_config(tmp_path, exhaustion={"center": "g0", "radii": [4, 2]})
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 1


def test_oracle_golden_two_point(tmp_path, capsys):
    matrix = tmp_path / "m.json"
    matrix.write_text(json.dumps([[1.0, 0.5], [0.5, 1.0]]))
    assert main(["oracle", "--matrix", str(matrix)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["value"] == pytest.approx(0.75, abs=EL_TOL)
    assert out["weights"] == {"p0": pytest.approx(0.5), "p1": pytest.approx(0.5)}
    assert out["certified_global"] is True


def test_oracle_accepts_wrapped_matrix_and_out_file(tmp_path, capsys):
    matrix = tmp_path / "m.json"
    matrix.write_text(json.dumps({"matrix": [[2.0, 0.0], [0.0, 1.0]]}))
    dest = tmp_path / "oracle.json"
    assert main(["oracle", "--matrix", str(matrix), "--out", str(dest)]) == 0
    capsys.readouterr()
    saved = json.loads(dest.read_text())
    assert saved["value"] == pytest.approx(2.0 / 3.0, abs=EL_TOL)
    assert saved["weights"]["p1"] == pytest.approx(2.0 / 3.0, abs=EL_TOL)


def test_space_file_resolves_next_to_config(tmp_path):
    points = [{"id": f"g{i}", "coords": [float(i)]} for i in range(-6, 7)]
    (tmp_path / "space.json").write_text(json.dumps(
        {"points": points, "metric": "euclidean"}))
    cfg = write_config(tmp_path, space="space.json")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 0


def test_sweep_runs_grid(tmp_path, capsys):
    points = [{"id": f"g{i}", "coords": [float(i)]} for i in range(-6, 7)]
    base = {
        "space": {"points": points, "metric": "euclidean"},
        "kernel": {"kind": "tent", "amplitude": 1.0, "range": 1.0},
        "exhaustion": {"center": "g0", "radii": [2, 4]},
        "solver": {"restarts": 2, "certify": False},
    }
    sweep_cfg = tmp_path / "sweep_config.json"
    sweep_cfg.write_text(json.dumps(
        {"base": base, "grid": {"kernel.amplitude": [1.0, 2.0]}}))
    out_dir = str(tmp_path / "sweep_out")
    assert main(["sweep", "--config", str(sweep_cfg), "--out", out_dir]) == 0
    summary = json.loads(open(os.path.join(out_dir, "sweep.json")).read())
    assert len(summary["runs"]) == 2
    assert summary["runs"][0]["overrides"] == {"kernel.amplitude": 1.0}
    assert summary["runs"][1]["seed"] == 1
    for entry in summary["runs"]:
        assert os.path.exists(os.path.join(out_dir, entry["dir"], "run.json"))


def test_usage_error_on_missing_subcommand():
    assert main([]) == 64
