import json
import os
import subprocess
import sys

import numpy as np
import pytest

from convexuniq import io
from convexuniq.bodies import make_preset
from convexuniq.cli import run
from convexuniq.errors import DomainError
from convexuniq.pipeline import RunConfig, cmd_uniqueness
from convexuniq.sphere import random_bandlimited


def _run(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_body_command(capsys):
    code, out, _ = _run(capsys, "body", "--grid-L", "12", "--body1", "ball:2")
    rep = json.loads(out)
    assert code == 0 and rep["command"] == "body"


def test_condition_violation_exit_code(capsys):
    code, _, _ = _run(capsys, "condition", "--grid-L", "12", "--body1", "ball:1", "--body2", "ball:2")
    assert code == 2


def test_bad_input_exit_code(capsys):
    code, _, err = _run(capsys, "body", "--grid-L", "12", "--body1", "cube:1")
    assert code == 1 and "unknown preset" in err
    code, _, _ = _run(capsys, "body", "--grid-L", "12", "--body1", "ellipsoid:1,1,-1")
    assert code == 1


def test_uniqueness_verdicts(capsys):
    code, out, _ = _run(capsys, "uniqueness", "--grid-L", "16", "--body1", "ellipsoid:1.2,1,0.9",
                        "--body2", "ellipsoid:1.2,1,0.9@0.1,-0.2,0.05")
    rep = json.loads(out)
    assert code == 0 and rep["verdict"] == "equal_up_to_translation"
    np.testing.assert_allclose(rep["translation"], [0.1, -0.2, 0.05], atol=1e-9)
    code, out, _ = _run(capsys, "uniqueness", "--grid-L", "16", "--body1", "ball:1", "--body2", "ball:1")
    assert json.loads(out)["verdict"] == "identical"


def test_environment_override(capsys, monkeypatch):
    monkeypatch.setenv("CONVEXUNIQ_GRID_L", "10")
    _, out, _ = _run(capsys, "body")
    assert json.loads(out)["config"]["grid_L"] == 10
    _, out, _ = _run(capsys, "body", "--grid-L", "12")
    assert json.loads(out)["config"]["grid_L"] == 12


def test_outputs_deterministic(tmp_path, capsys):
    d = str(tmp_path / "out")
    args = ["integrals", "--grid-L", "12", "--body1", "ellipsoid:1.2,1,0.9", "--body2", "ball:1", "--out", d]
    _run(capsys, *args)
    first = {n: open(os.path.join(d, n), "rb").read() for n in sorted(os.listdir(d))}
    _run(capsys, *args)
    second = {n: open(os.path.join(d, n), "rb").read() for n in sorted(os.listdir(d))}
    assert first == second and "integrals.json" in first
    assert ".convexuniq.lock" not in first


def test_lock_blocks_concurrent_run(tmp_path, capsys):
    d = tmp_path / "out"
    with io.output_lock(str(d)):
        code, _, err = _run(capsys, "body", "--grid-L", "10", "--out", str(d))
        assert code == 1 and "locked" in err
    assert not (d / ".convexuniq.lock").exists()


def test_atomic_write_replaces(tmp_path):
    p = tmp_path / "a.json"
    io.write_json(str(p), {"b": 1, "a": [1.0, float("nan")]})
    io.write_json(str(p), {"b": 2})
    assert json.loads(p.read_text()) == {"b": 2}
    assert io.dumps({"b": 1, "a": 2}).index('"a"') < io.dumps({"b": 1, "a": 2}).index('"b"')
    assert json.loads(io.dumps({"x": float("inf"), "y": float("nan")})) == {"x": "inf", "y": None}


def test_field_round_trip(grid16, rng, tmp_path):
    u = random_bandlimited(grid16, 6, rng)
    v = io.field_from_dict(json.loads(io.dumps(io.field_to_dict(u))), grid16)
    np.testing.assert_array_equal(u.values, v.values)
    d = io.field_to_dict(u)
    d["values"] = None
    np.testing.assert_allclose(io.field_from_dict(d).values, u.values, atol=1e-13)
    io.write_field_csv(str(tmp_path / "u.csv"), u)
    data = np.loadtxt(tmp_path / "u.csv", delimiter=",", skiprows=1)
    np.testing.assert_allclose(data[:, 3], u.values, rtol=1e-15)


def test_body_round_trip(grid16, tmp_path):
    b = make_preset("harmonic_perturbed_ball", [1.0, 3, 1, 0.03, 0.1, 0, 0], grid16)
    p = tmp_path / "b.json"
    io.write_json(str(p), io.body_to_dict(b))
    c = io.parse_body_spec(str(p), grid16)
    np.testing.assert_allclose(c.u.values, b.u.values, atol=1e-15)
    f = io.body_from_dict({"kind": "field", "field": io.field_to_dict(b.u)}, grid16)
    np.testing.assert_array_equal(f.u.values, b.u.values)


def test_body_spec_translation(grid16):
    b = io.parse_body_spec("ball:1@0.1,0.2,0.3", grid16)
    np.testing.assert_allclose(b.u.values, 1 + grid16.nodes @ [0.1, 0.2, 0.3])
    with pytest.raises(DomainError):
        io.parse_body_spec("ball:1@0.1", grid16)


def test_config_validation():
    with pytest.raises(DomainError):
        RunConfig(grid_L=1)
    with pytest.raises(DomainError):
        RunConfig(functional="nonsense")


def test_verdict_object():
    verdict, code = cmd_uniqueness(RunConfig(grid_L=12, body1="ball:1", body2="ball:1@0,0,0.3"))
    assert code == 0 and verdict.verdict == "equal_up_to_translation"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "convexuniq", "condition", "--grid-L", "10",
                          "--body1", "ball:1", "--body2", "ball:3"], capture_output=True, text=True)
    assert res.returncode == 2


def test_command_examples():
    from convexuniq.pipeline import cmd_body, cmd_condition, cmd_kernel

    rep, code = cmd_kernel(RunConfig(grid_L=16, coefficients="identity"))
    assert code == 0 and rep["kernel"]["kernel_dim"] == 3 and rep["frame"] == "thetaphi"
    rep, code = cmd_body(RunConfig(grid_L=12, body1="ball:1"))
    assert code == 0 and np.allclose(rep["boundary_radius_range"], 1.0, atol=1e-13)
    rep, code = cmd_condition(RunConfig(grid_L=12, body1="ball:1", body2="ball:1"))
    assert code == 0 and rep["residual_max"] == 0.0


def test_uniqueness_stages_saved(tmp_path):
    out = str(tmp_path / "u")
    verdict, code = cmd_uniqueness(RunConfig(grid_L=16, body1="ellipsoid:1.2,1,0.9",
                                             body2="ellipsoid:1.2,1,0.9@0,0.2,0", out=out))
    assert verdict.kernel["kernel_dim"] == 3 and verdict.certificate["passed"]
    assert "verdict.json" in os.listdir(out) and len(os.listdir(out)) > 2
