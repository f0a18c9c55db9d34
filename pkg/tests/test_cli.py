from __future__ import annotations

import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from nlc_monitor.cli import EXIT_USAGE, run_cli

SRC = Path(__file__).resolve().parents[1] / "src"


def nlc_monitor(*args: str, cwd: Path) -> subprocess.CompletedProcess[str]:
    env = dict(os.environ)
    env["PYTHONPATH"] = os.pathsep.join(filter(None, [str(SRC),
                                                      env.get("PYTHONPATH")]))
    return subprocess.run(
        [sys.executable, "-m", "nlc_monitor.cli", *args],
        cwd=cwd,
        env=env,
        capture_output=True,
        text=True,
        check=False,
    )


@pytest.mark.e2e
def test_version(tmp_path):
    proc = nlc_monitor("--version", cwd=tmp_path)
    assert proc.returncode == 0
    assert proc.stdout.startswith("nlc-monitor ")


@pytest.mark.e2e
def test_no_command_prints_help(capsys):
    assert run_cli([]) == 0
    assert "simulate" in capsys.readouterr().out


@pytest.mark.e2e
@pytest.mark.parametrize(
    "argv",
    [
        ["frobnicate"],
        ["verify", "everything"],
        ["verify", "riesz", "--n", "sixteen"],
        ["simulate"],
    ],
)
def test_bad_command_lines_exit_with_usage(argv):
    assert run_cli(argv) == EXIT_USAGE


@pytest.mark.e2e
def test_verify_riesz(capsys):
    assert run_cli(["verify", "riesz", "--count", "1", "--quiet"]) == 0
    header = capsys.readouterr().out.splitlines()[0]
    assert header == "check,value,lower,upper,pass"


@pytest.mark.e2e
def test_monitor_an_empty_directory(tmp_path, capsys):
    assert run_cli(["monitor", "--series", str(tmp_path)]) == 2
    line = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert line["stage"] == "ingest"


@pytest.mark.e2e
def test_bad_config_file(tmp_path, capsys):
    config = tmp_path / "run.toml"
    config.write_text("speed = 1\n", encoding="utf-8")
    code = run_cli(["--config", str(config), "verify", "growth"])
    assert code == 2
    line = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert line == {"stage": "config", "message": "Unsupported config key: speed"}


@pytest.mark.e2e
def test_simulate_then_monitor(tmp_path):
    series = tmp_path / "series"
    proc = nlc_monitor(
        "simulate", "--init", "tg", "--N", "16", "--dt", "0.01", "--T", "0.02",
        "--snapshot-every", "0.01", "--out", str(series), "--threads", "1",
        cwd=tmp_path,
    )
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["snapshots"] == 3

    outputs = []
    for name in ("first.csv", "second.csv"):
        proc = nlc_monitor("monitor", "--series", str(series),
                           "--out", str(tmp_path / name), cwd=tmp_path)
        assert proc.returncode == 0, proc.stderr
        verdict = json.loads(proc.stdout)
        assert verdict["snapshots"] == 3
        outputs.append((tmp_path / name).read_bytes())

    assert outputs[0] == outputs[1]
    rows = outputs[0].decode("utf-8").splitlines()
    assert rows[0].startswith("t,functional,threshold,")
    assert len(rows) == 4


@pytest.mark.e2e
def test_beltrami_series_verdict(tmp_path, capsys):
    series = tmp_path / "beltrami"
    code = run_cli(["simulate", "--init", "beltrami", "--N", "16", "--dt", "0.01",
                    "--T", "1", "--snapshot-every", "0.1", "--out", str(series),
                    "--threads", "1"])
    assert code == 0
    assert json.loads(capsys.readouterr().out)["snapshots"] == 11

    out = tmp_path / "nlc.csv"
    assert run_cli(["monitor", "--series", str(series), "--T-blowup", "2",
                    "--out", str(out), "--threads", "1"]) == 0
    verdict = json.loads(capsys.readouterr().out)
    assert verdict["snapshots"] == 11
    # A Beltrami field is not mirror symmetric, so C = 1 is too small.
    assert verdict["verdict"] == "violated"
    rows = [row.split(",") for row in out.read_text(encoding="utf-8").splitlines()]
    assert len(rows) == 12
    times = [float(row[0]) for row in rows[1:]]
    assert times[0] == 0.0
    assert times[-1] == pytest.approx(1.0)
    margin = [float(row[1]) / float(row[2]) for row in rows[1:]]
    assert margin[-1] < margin[0]

    c = str(verdict["c_required"] * 1.01)
    assert run_cli(["monitor", "--series", str(series), "--T-blowup", "2",
                    "--C", c, "--out", str(out), "--threads", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["verdict"] == "satisfied"
    rows = out.read_text(encoding="utf-8").splitlines()[1:]
    assert [row.split(",")[-1] for row in rows] == ["1"] * 11


@pytest.mark.e2e
def test_counterexample_then_norms(tmp_path, capsys):
    snapshot = tmp_path / "twist.nscv"
    code = run_cli(["counterexample", "--lambda", "1", "--N", "16",
                    "--out", str(snapshot)])
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["lambda"] == 1.0

    code = run_cli(["norms", "--input", str(snapshot), "--space", "lip",
                    "--component", "3"])
    assert code == 0
    header, row = capsys.readouterr().out.splitlines()
    assert header == "space,p,value,pointTerm,argmax_center,argmax_radius"
    assert row.startswith("lip,")
