import json
import subprocess
import sys

import pytest

from qtensor.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def run_json(capsys, *argv):
    code, out = run(capsys, *argv)
    return code, json.loads(out)


def assert_error(body):
    assert set(body) == {"error"}
    assert set(body["error"]) == {"type", "message", "exit_code"}
    assert body["error"]["exit_code"] == 2


def test_tensors_hopf(capsys):
    code, body = run_json(capsys, "tensors", "--model", "hopf", "--dim", "2", "--points", "10", "--seed", "1")
    assert code == 0 and len(body["records"]) == 10
    for rec in body["records"]:
        assert set(rec["tensors"]) == {"Gamma", "T", "R", "Q", "B", "DdbarOmega"}
        assert all(abs(re) < 1e-9 and abs(im) < 1e-9 for _, re, im in rec["tensors"]["Q"]["entries"])


def test_tensors_flat_zero(capsys):
    code, body = run_json(capsys, "tensors", "--model", "flat", "--dim", "3", "--points", "1")
    assert code == 0
    assert all(t["max_abs"] == 0 for t in body["records"][0]["tensors"].values())


def test_tensors_csv(capsys):
    code, out = run(capsys, "tensors", "--model", "hopf", "--dim", "2", "--format", "csv")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "point,role,index,re,im"
    assert len(lines) == 1 + 8 + 8 + 16 * 4  # Gamma, T, then four rank-4 tensors


def test_invalid_model_is_usage_error(capsys):
    code, body = run_json(capsys, "tensors", "--model", "nope")
    assert code == 2
    assert_error(body)


@pytest.mark.parametrize("argv", [
    ["verify", "--model", "hopf"],  # no identity selected
    ["verify", "--identity", "nope", "--model", "hopf"],
    ["fuzz", "--order", "1"],
    ["tensors", "--model", "flat", "--dim", "9"],
    ["tensors", "--model", "hopf", "--dim", "1"],
    ["tensors", "--model", "hopf", "--params", "[1"],
    ["qcheck", "--model", "hopf", "--frames", "0"],
    ["verify", "--identity", "bochner", "--model", "polynomial_random"],
    ["qcheck", "--model", "hopf", "--kind", "qob"],
    ["fuzz", "--identity", "bochner"],
    ["tensors", "--model", "hopf", "--point-list", "[[[0, 0], [0, 0]]]"],
])
def test_usage_errors(capsys, argv):
    code, body = run_json(capsys, *argv)
    assert code == 2
    assert_error(body)


def test_verify_all_hopf3(capsys):
    code, body = run_json(capsys, "verify", "--all", "--model", "hopf", "--dim", "3")
    assert code == 0 and body["pass"]
    ids = {r["identity"] for r in body["reports"]}
    assert {"proposition", "bismut_two_route", "q_symmetry", "commutation", "bochner"} <= ids


def test_verify_conformal(capsys):
    code, body = run_json(capsys, "verify", "--identity", "conformal", "--base", "fubini_study", "--dim", "2",
                          "--f", "re_z1")
    assert code == 0 and body["reports"][0]["pass"]


def test_verify_q_symmetry_informational(capsys):
    code, body = run_json(capsys, "verify", "--identity", "q_symmetry", "--model", "polynomial_random", "--seed", "3")
    rep = body["reports"][0]
    assert code == 0 and rep["informational"] and rep["max_residual"] > 1e-6 and not rep["pass"]


def test_verify_failure_exit_code(capsys):
    code, body = run_json(capsys, "verify", "--identity", "proposition", "--model", "hopf", "--tol", "1e-300")
    assert code == 1 and not body["pass"] and body["worst_offenders"]


def test_qcheck_hopf(capsys):
    code, body = run_json(capsys, "qcheck", "--model", "hopf", "--dim", "3", "--frames", "1000", "--seed", "7",
                          "--points", "10")
    assert code == 0 and body["verdict"] == "no-violation-found"
    assert {"model", "seed", "n_points", "n_frames", "tol", "min_eigenvalue", "verdict"} <= set(body)


def test_qcheck_flat(capsys):
    code, body = run_json(capsys, "qcheck", "--model", "flat", "--dim", "2", "--points", "5", "--frames", "20")
    assert code == 0 and body["min_eigenvalue"] == 0


def test_qcheck_violation_replay(capsys, tmp_path):
    cert = tmp_path / "cert.json"
    again = tmp_path / "again.json"
    assert main(["qcheck", "--model", "hyperbolic_ball", "--points", "5", "--frames", "30", "--out", str(cert)]) == 1
    body = json.loads(cert.read_text())
    assert body["verdict"] == "violation" and "witness" in body
    assert main(["qcheck", "--replay", str(cert), "--out", str(again)]) == 1
    assert again.read_bytes() == cert.read_bytes()


def test_fuzz_pass_writes_empty_replay(capsys, tmp_path):
    replay = tmp_path / "r.json"
    code, body = run_json(capsys, "fuzz", "--cases", "20", "--replay-out", str(replay))
    assert code == 0 and body["failures"] == 0
    assert json.loads(replay.read_text()) == []


def test_fuzz_failure_replays_bit_identically(capsys, tmp_path):
    replay, out = tmp_path / "r.json", tmp_path / "o.json"
    code, _ = run(capsys, "fuzz", "--cases", "3", "--tol", "1e-300", "--replay-out", str(replay))
    assert code == 1
    assert len(json.loads(replay.read_text())) == 3
    assert main(["fuzz", "--replay", str(replay), "--out", str(out)]) == 1
    assert out.read_bytes() == replay.read_bytes()


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"model": "flat", "dim": 3, "points": 2}))
    code, body = run_json(capsys, "tensors", "--config", str(cfg))
    assert code == 0 and body["model"]["dim"] == 3 and len(body["records"]) == 2
    code, body = run_json(capsys, "tensors", "--config", str(cfg), "--dim", "2")
    assert body["model"]["dim"] == 2


def test_unknown_config_key(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"modle": "flat"}))
    code, body = run_json(capsys, "tensors", "--config", str(cfg))
    assert code == 2 and "modle" in body["error"]["message"]


def test_env_seed(capsys, monkeypatch):
    monkeypatch.setenv("QTENSOR_SEED", "11")
    _, a = run_json(capsys, "tensors", "--model", "fubini_study")
    _, b = run_json(capsys, "tensors", "--model", "fubini_study", "--seed", "11")
    assert a == b
    monkeypatch.setenv("QTENSOR_SEED", "x")
    code, body = run_json(capsys, "tensors", "--model", "fubini_study")
    assert code == 2


def test_reruns_are_byte_identical(capsys):
    argv = ["verify", "--all", "--model", "polynomial_random", "--seed", "4", "--points", "3"]
    assert run(capsys, *argv) == run(capsys, *argv)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qtensor", "tensors", "--model", "nope"], capture_output=True, text=True)
    assert proc.returncode == 2 and json.loads(proc.stdout)["error"]["type"] == "usage"
