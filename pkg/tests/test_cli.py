import json
import math

import pytest

from habitat_waves import cli
from habitat_waves.errors import NumericalError


def run(capsys, *argv):
    code = cli.main(list(argv))
    return code, capsys.readouterr()


def test_speed(capsys, tmp_path):
    code, cap = run(capsys, "speed", "--out", str(tmp_path))
    assert code == 0
    data = json.loads(cap.out)
    assert abs(data["c_star"] - math.exp(0.5)) < 1e-8
    man = json.loads((tmp_path / "speed_manifest.json").read_text())
    assert man["exit_code"] == 0 and man["config_hash"]


def test_roots(capsys, tmp_path):
    code, cap = run(capsys, "roots", "--out", str(tmp_path))
    data = json.loads(cap.out)
    assert code == 0 and abs(data["mu_plus"] - math.sqrt(2 * math.log(2))) < 1e-8


def test_usage_errors(capsys, tmp_path):
    assert run(capsys, "bogus", "--out", str(tmp_path))[0] == 1
    assert (tmp_path / "usage_manifest.json").exists()
    code, cap = run(capsys, "speed", "--c", "-1", "--out", str(tmp_path))
    assert code == 1 and "mirror" in cap.err


def test_bad_config_lists_every_problem(capsys, tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"growth": {"r": -1}, "spectral": {"method": "qr"}, "extra": 1}))
    code, cap = run(capsys, "speed", "--config", str(cfg), "--out", str(tmp_path))
    assert code == 1
    for piece in ("growth.r", "spectral.method", "extra"):
        assert piece in cap.err
    man = json.loads((tmp_path / "speed_manifest.json").read_text())
    assert man["exit_code"] == 1 and "growth.r" in man["outcome"]["error"]


def test_numerical_failure_exit_code(capsys, tmp_path, monkeypatch):
    def fail(*args, **kwargs):
        raise NumericalError("did not converge", {"iterations": 3})

    monkeypatch.setitem(cli.COMMANDS, "speed", fail)
    code, cap = run(capsys, "speed", "--out", str(tmp_path))
    assert code == 2
    man = json.loads((tmp_path / "speed_manifest.json").read_text())
    assert man["exit_code"] == 2 and man["outcome"]["diagnostics"] == {"iterations": 3}


def test_audit_failure_exit_code(capsys, tmp_path, monkeypatch):
    def fail(*args, **kwargs):
        raise cli.AuditFailure("ordering violated")

    monkeypatch.setitem(cli.COMMANDS, "audit", fail)
    assert run(capsys, "audit", "--out", str(tmp_path))[0] == 3


def test_lstar_beyond_spreading_speed(capsys, tmp_path):
    code, cap = run(capsys, "lstar", "--c", "2.0", "--out", str(tmp_path))
    assert code == 0 and json.loads(cap.out)["finite"] is False


def test_small_sweep_and_svg(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"grid": {"x_max": 30.0, "n": 601},
                               "spectral": {"cross_check": False}}))
    code, _ = run(capsys, "sweep", "--config", str(cfg), "--c-values", "0,2", "--L-values", "10",
                  "--svg", "--out", str(tmp_path))
    assert code == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == "c,L,lambda,classification,steady_max" and len(lines) == 3
    assert "Persistence" in lines[1] and "Extinction" in lines[2]
    assert any(p.suffix == ".svg" for p in tmp_path.iterdir())
