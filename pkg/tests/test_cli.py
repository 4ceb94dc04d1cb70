import json
import subprocess
import sys

import pytest

from plyse.cli import main

SMALL = ["--set", "N=400", "--set", "window=50"]


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_run_writes_json_and_trace(tmp_path, capsys):
    assert main(["run", "--policy", "lco", "--seed", "3", "--out", str(tmp_path), *SMALL]) == 0
    doc = json.loads((tmp_path / "run-lco-s3.json").read_text())
    assert doc["seed"] == 3 and doc["metrics"]["N"] == 400 and doc["params"]["N"] == 400
    assert (tmp_path / "fig2-feasibility-run-lco-s3.csv").exists()
    assert "R_bar=" in capsys.readouterr().out


def test_outputs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["run", "--out", str(d), "--state-trace", "st.csv", *SMALL]) == 0
        assert main(["capacity", "--out", str(d)]) == 0
    assert _files(a) == _files(b)


def test_config_file_and_policy_key(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# small run\npolicy = eco\nN = 200\nseed = 9\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "run-eco-s9.json").exists()


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--set", "bogus=1"],
        ["run", "--set", "N=-5"],
        ["run", "--set", "novalue"],
        ["run", "--policy", "greedy"],
        ["run", "--config", "/nonexistent/x.cfg"],
        ["replay", "--events", "/nonexistent/ev.csv"],
    ],
)
def test_bad_input_exits_nonzero(tmp_path, argv, capsys):
    assert main([*argv, "--out", str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("PLYSE_OUT", str(tmp_path / "env"))
    assert main(["capacity"]) == 0
    cap = json.loads((tmp_path / "env" / "capacity.json").read_text())["capacity"]
    assert 137.3 <= cap["omega_threshold"] <= 138.3


def test_replay_reproduces_run(tmp_path):
    assert main(["run", "--policy", "plyse", "--dump-events", "ev.csv", "--out", str(tmp_path), *SMALL]) == 0
    assert main(["replay", "--policy", "plyse", "--events", str(tmp_path / "ev.csv"), "--out", str(tmp_path), *SMALL]) == 0
    a = json.loads((tmp_path / "run-plyse-s0.json").read_text())
    b = json.loads((tmp_path / "replay-plyse-s0.json").read_text())
    assert a == b


def test_state_trace(tmp_path):
    assert main(["run", "--state-trace", "st.csv", "--out", str(tmp_path), *SMALL]) == 0
    rows = [l for l in (tmp_path / "st.csv").read_text().splitlines() if not l.startswith("#")]
    assert rows[0] == "slot,Q_U,Q_S,B,Z,r,p_u,f_u,f_s,a_t" and len(rows) == 401


def test_sweep_files(tmp_path, capsys):
    rc = main(
        ["sweep", "--param", "V", "--values", "16e7,64e7", "--replications", "2", "--policies", "plyse,lco",
         "--out", str(tmp_path), *SMALL]
    )
    assert rc == 0
    body = [l for l in (tmp_path / "fig3-Vsweep.csv").read_text().splitlines() if not l.startswith("#")]
    assert len(body) == 1 + 2 * 2 * 2
    summary = (tmp_path / "fig3-Vsweep-summary.csv").read_text().splitlines()
    assert len(summary) == 1 + 4
    assert "V=1.6e+08 plyse" in capsys.readouterr().out


def test_sweep_other_param_name(tmp_path):
    assert main(["sweep", "--param", "c_th", "--values", "1.6", "--replications", "1", "--policies", "eco",
                 "--out", str(tmp_path), *SMALL]) == 0
    assert (tmp_path / "fig5-comparisons-c_th.csv").exists()


def test_sweep_error_exit_code(tmp_path):
    rc = main(["sweep", "--param", "r_max", "--values", "-1", "--replications", "1", "--policies", "lco",
               "--out", str(tmp_path), *SMALL])
    assert rc == 1


def test_oracle_check_command(tmp_path, capsys):
    assert main(["oracle-check", "--n", "20", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.strip().endswith("failures over 20 samples") and "PASS" in out
    lines = [l for l in (tmp_path / "oracle-gaps.csv").read_text().splitlines() if not l.startswith("#")]
    assert len(lines) == 1 + 20 * 6


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "plyse", "capacity", "--out", str(tmp_path)], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0 and "omega_threshold" in proc.stdout
