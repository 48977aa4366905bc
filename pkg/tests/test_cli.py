import csv
import json
import subprocess
import sys

from hamiltonia.cli import EXIT_INVALID, EXIT_OK, EXIT_USAGE, main


def run(args):
    return main([str(a) for a in args])


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_melnikov_table(tmp_path):
    assert run(["melnikov", "--I0", 0.5, "--theta", 1.0, "--grid", 32, "--output-dir", tmp_path]) == EXIT_OK
    rows = read_rows(tmp_path / "melnikov.csv")
    assert len(rows) == 32
    assert max(float(r["abs_err"]) for r in rows) < 1e-6
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["subcommand"] == "melnikov" and man["outputs"] == ["melnikov.csv"]
    assert "Philox" in man["rng"]


def test_missing_config(tmp_path, capsys):
    assert run(["survey", "--config", tmp_path / "missing.cfg"]) == EXIT_INVALID
    assert "missing.cfg" in capsys.readouterr().err


def test_unknown_subcommand(capsys):
    assert run(["frobnicate"]) == EXIT_USAGE
    assert "usage" in capsys.readouterr().err.lower()
    assert run([]) == EXIT_USAGE


def test_sample_coefficient_count(tmp_path):
    assert run(["sample", "--d", 2, "--L", 1, "--seed", 7, "--output-dir", tmp_path]) == EXIT_OK
    pot = json.loads((tmp_path / "potential.json").read_text())
    assert len(pot["coefficients"]) == 8


def test_manifest_round_trip(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["sample", "--d", 2, "--L", 3, "--seed", 11, "--output-dir", a]) == EXIT_OK
    assert run(["sample", "--config", a / "manifest.json", "--output-dir", b]) == EXIT_OK
    assert (a / "potential.json").read_text() == (b / "potential.json").read_text()
    man = json.loads((b / "manifest.json").read_text())
    assert man["seed"] == 11 and man["config"]["L"] == 3


def test_env_seed_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("HAMILTONIA_SEED", "42")
    assert run(["sample", "--L", 2, "--output-dir", tmp_path]) == EXIT_OK
    assert json.loads((tmp_path / "manifest.json").read_text())["seed"] == 42


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("I0: 2.0\ngrid: 4\n")
    assert run(["melnikov", "--config", cfg, "--grid", 6, "--output-dir", tmp_path / "o"]) == EXIT_OK
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["config"]["I0"] == 2.0 and man["config"]["grid"] == 6


def test_invalid_values(tmp_path, capsys):
    assert run(["melnikov", "--I0", -1, "--output-dir", tmp_path]) == EXIT_INVALID
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nonsense": 1}))
    assert run(["melnikov", "--config", bad, "--output-dir", tmp_path]) == EXIT_INVALID
    assert run(["survey", "--band", -2, -1, "--output-dir", tmp_path]) == EXIT_INVALID
    assert run(["melnikov", "--grid", "x"]) == EXIT_INVALID


def test_integrate(tmp_path):
    args = ["integrate", "--system", "harmonic", "--d", 1, "--q", 1.0, "--p", 0.0, "--t-end", 1.0, "--h", 0.1,
            "--record-every", 1, "--output-dir", tmp_path]
    assert run(args) == EXIT_OK
    rows = read_rows(tmp_path / "trajectory.csv")
    assert len(rows) == 11 and abs(float(rows[-1]["H"]) - 0.5) < 1e-3


def test_covariance(tmp_path):
    assert run(["covariance", "--d", 1, "--L", 5, "--points", 9, "--output-dir", tmp_path]) == EXIT_OK
    assert len(read_rows(tmp_path / "covariance.csv")) == 9


def test_chaos_and_tori(tmp_path):
    assert run(["chaos", "--n-samples", 4, "--t-total", 200, "--output-dir", tmp_path / "c"]) == EXIT_OK
    reps = json.loads((tmp_path / "c" / "chaos_reports.json").read_text())
    assert len(reps) == 4 and all(2.2 < r["energy"] < 2.8 for r in reps)
    assert run(["tori", "--system", "zero", "--band", 0.5, 1.0, "--n-samples", 8, "--output-dir", tmp_path / "t"]) == EXIT_OK
    est = json.loads((tmp_path / "t" / "tori.json").read_text())
    assert est["n_samples"] == 8


def test_small_survey(tmp_path):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"L_list": [2], "trials": 1,
                               "budget": {"n_traj": 4, "t_total": 200.0, "record_every": 1}}))
    assert run(["survey", "--config", cfg, "--seed", 3, "--output-dir", tmp_path / "s"]) == EXIT_OK
    rows = read_rows(tmp_path / "s" / "survey_summary.csv")
    assert rows[0]["L"] == "2" and rows[0]["trials"] == "1"


def test_module_entry_point(tmp_path):
    cmd = [sys.executable, "-m", "hamiltonia", "melnikov", "--grid", "4", "--output-dir", str(tmp_path)]
    out = subprocess.run(cmd, capture_output=True, text=True)
    assert out.returncode == 0
    assert out.stdout.strip().endswith("manifest.json")
