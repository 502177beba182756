import json
import subprocess
import sys

import pytest

from rmflab.cli import build_parser, config_from_args, main


def test_verify_exit_codes(tmp_path, capsys):
    assert main(["verify", "--out", str(tmp_path / "ok")]) == 0
    assert main(["verify", "--inject-fault"]) == 1
    out = capsys.readouterr().out
    assert '"all_passed": false' in out


def test_report_round_trip(tmp_path, capsys):
    assert main(["ballot", "--replicas", "1000", "--steps", "4,16", "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    assert main(["report", str(tmp_path)]) == 0
    assert "slope" in capsys.readouterr().out
    (tmp_path / "summary.json").write_text(json.dumps({"schema_version": 1}))
    assert main(["report", str(tmp_path)]) == 1
    assert main(["report", str(tmp_path / "missing")]) == 2


def test_usage_errors(tmp_path):
    assert main(["theorem2", "--replicas", "0"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"unknown": 3}))
    assert main(["theorem2", "--config", str(bad)]) == 2
    bad.write_text("{not json")
    assert main(["theorem2", "--config", str(bad)]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["theorem2", "--model", "gaussian"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["ballot", "--steps", "a,b"])
    assert exc.value.code == 2


def test_capacity_exit_code(capsys):
    assert main(["moments", "--replicas", "2", "--x-values", "100,1e11"]) == 3
    assert "capacity" in capsys.readouterr().err


def test_config_file_and_flags_merge(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"replicas": 7, "X": 500, "experiment": "ignored"}))
    args = build_parser().parse_args(["chaos-probe", "--config", str(cfg), "--replicas", "9", "--w", "1,4", "--sigma", "0.1"])
    c = config_from_args(args)
    assert (c.experiment, c.replicas, c.X, c.W, c.sigma) == ("chaos-probe", 9, 500, (1.0, 4.0), 0.1)


def test_defaults_per_command():
    c = config_from_args(build_parser().parse_args(["covariance"]))
    assert (c.X, c.replicas, c.grid_points) == (1e3, 100, 30)


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "rmflab", "euler-moments", "--replicas", "1", "--window", "100,1000", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["within_radius"] is True
    assert (tmp_path / "summary.json").exists()
