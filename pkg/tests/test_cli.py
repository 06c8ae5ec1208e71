import csv
import json
import subprocess
import sys

import pytest

from pilotwave import cli


def run_cli(*args):
    return cli.main([str(a) for a in args])


def load(path):
    return json.loads(path.read_text())


def test_defaults_are_filled():
    rc = cli.parse_config(["--mode", "nonretarded"])
    v = rc.values
    assert (v["a"], v["p"], v["m"], v["dt"], rc.n) == (1.0, 1.0, 1.0, 1e-3, 10_000)
    assert rc.experiment.t_final == 10.0


def test_light_speed_sets_the_delay(tmp_path):
    out = tmp_path / "r.json"
    assert run_cli("--mode", "retarded", "--l", 1, "--c", 1, "--n", 50, "--out", out) == 0
    doc = load(out)
    assert doc["derived"]["T"] == 2.0 and doc["stats"]["T"] == 2.0
    assert doc["config"]["c"] == 1.0 and "T" not in doc["config"]


def test_retarded_needs_a_delay(capsys):
    assert run_cli("--mode", "retarded") == cli.EXIT_CONFIG
    assert "needs T" in capsys.readouterr().err


def test_negative_parameter_names_the_field(capsys):
    assert run_cli("--mode", "nonretarded", "--a", -1) == cli.EXIT_CONFIG
    assert "a must be a positive number" in capsys.readouterr().err


def test_unknown_keys_are_listed(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"mode": "sweep", "bogus": 1, "zeta": 2}))
    assert run_cli("--config", cfg) == cli.EXIT_CONFIG
    assert "bogus, zeta" in capsys.readouterr().err


def test_mixed_units_rejected(capsys):
    assert run_cli("--mode", "retarded", "--T", 1, "--c", 3) == cli.EXIT_CONFIG
    assert "cannot be mixed" in capsys.readouterr().err


def test_bad_flags_are_config_errors():
    assert run_cli("--mode", "nope") == cli.EXIT_CONFIG
    assert run_cli("--mode", "nonretarded", "--emit-samples") == cli.EXIT_CONFIG
    assert run_cli("--mode", "nonretarded", "--u0", 1.0) == cli.EXIT_CONFIG


def test_yaml_config(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("mode: nonretarded\nn: 40\nseed: 3\nt-final: 12\n")
    rc = cli.parse_config(["--config", str(cfg), "--seed", "4"])
    assert rc.n == 40 and rc.seed == 4 and rc.experiment.t_final == 12.0


def test_round_trip_reproduces_stats(tmp_path):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    assert run_cli("--mode", "retarded", "--T", 1.5, "--n", 300, "--seed", 11, "--out", first) == 0
    assert run_cli("--config", first, "--out", second) == 0
    a, b = load(first), load(second)
    assert a["stats"] == b["stats"] and a["config"] == b["config"] and a["seed"] == b["seed"] == 11


def test_sample_and_trajectory_csv(tmp_path):
    out = tmp_path / "nr.json"
    assert run_cli("--mode", "nonretarded", "--n", 25, "--out", out, "--emit-samples",
                   "--emit-trajectories", 2) == 0
    with open(tmp_path / "nr_samples.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == list(cli.SAMPLE_HEADER) and len(rows) == 25
    assert all(r["outcome"] == ("Right" if float(r["u0"]) > float(r["v0"]) else "Left") for r in rows)
    with open(tmp_path / "nr_trajectories.csv") as fh:
        traj = list(csv.reader(fh))
    assert tuple(traj[0]) == cli.TRAJECTORY_HEADER and len(traj) == 1 + 2 * 10_001
    assert load(out)["artifacts"]["samples"].endswith("nr_samples.csv")


def test_retarded_trajectory_csv(tmp_path):
    out = tmp_path / "r.json"
    assert run_cli("--mode", "retarded", "--T", 1, "--u0", 0.3, "--v0", -0.2, "--out", out,
                   "--emit-trajectories") == 0
    with open(tmp_path / "r_trajectories.csv") as fh:
        rows = list(csv.reader(fh))[1:]
    assert float(rows[0][2]) == 0.3 and float(rows[-1][1]) == pytest.approx(10.0)
    assert load(out)["stats"]["rng_seed"] is None


def test_sweep_csv(tmp_path):
    out = tmp_path / "s.json"
    assert run_cli("--mode", "sweep", "--T-list", 0, 1, "--n", 200, "--out", out) == 0
    with open(tmp_path / "s_sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["T", "wrong_fraction", "frac_left", "frac_right", "frac_both",
                             "frac_neither", "n"]
    assert float(rows[0]["wrong_fraction"]) == 0.0 and len(rows) == 2


def test_oracle_check(capsys):
    assert run_cli("--mode", "oracle_check", "--seed", 2) == 0
    captured = capsys.readouterr()
    doc = json.loads(captured.out)
    assert doc["stats"]["n"] == 100 and doc["stats"]["max_residual"] < 1e-6
    assert "PASS" in captured.err


def test_physical_units(capsys):
    args = ["--mode", "physical_units", "--l", 3, "--m", 9.109e-31, "--lambda", 5e-7, "--d", 1e-10]
    assert run_cli(*args) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["stats"]["wrongness_parameter"] > 1e3
    assert run_cli("--mode", "physical_units", "--l", 3) == cli.EXIT_CONFIG


def test_equivariance_mode(capsys):
    assert run_cli("--mode", "equivariance", "--n", 1000, "--t1", 0.2, "--dt", 0.01) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["stats"]["ks_statistic"] < doc["stats"]["tolerance"]


def test_numerical_failure_leaves_no_output(tmp_path, capsys):
    out = tmp_path / "x.json"
    assert run_cli("--mode", "nonretarded", "--u0", "nan", "--v0", 0, "--out", out) == cli.EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err
    assert list(tmp_path.iterdir()) == []


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run_cli("--mode", "nonretarded", "--n", 5, "--out", blocker / "out.json") == cli.EXIT_IO
    assert run_cli("--mode", "nonretarded", "--n", 5, "--out", tmp_path) == cli.EXIT_IO


def test_atomic_write_leaves_no_temporaries(tmp_path):
    out = tmp_path / "a.json"
    assert run_cli("--mode", "nonretarded", "--n", 5, "--out", out, "--emit-samples") == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a.json", "a_samples.csv"]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "pilotwave", "--mode", "physical_units", "--l", "3",
                          "--m", "1e-3", "--lambda", "5e-7", "--d", "1e-3"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert json.loads(res.stdout)["stats"]["wrongness_parameter"] < 1e-20
