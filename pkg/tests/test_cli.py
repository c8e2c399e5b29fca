import csv
import json
import subprocess
import sys

import pytest

from gpswarm.cli import main


def test_run_happy_path(tmp_path, capsys):
    out = tmp_path / "r"
    code = main(["run", "--variant", "spso2011", "--function", "sphere", "--dim", "2", "--budget", "2000",
                 "--seed", "7", "--out", str(out)])
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_evals"] == 2000
    assert "best value" in capsys.readouterr().out


def test_run_is_deterministic(tmp_path):
    args = ["run", "--variant", "a3", "--function", "rastrigin", "--dim", "2", "--budget", "60", "--n-par", "10",
            "--fit-restarts", "2", "--seed", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0

    def rows(p):
        with open(p / "trace.csv", newline="") as fh:
            return [r[:-1] for r in csv.reader(fh)]  # drop elapsed_seconds

    assert rows(tmp_path / "a") == rows(tmp_path / "b")


def test_unknown_function_exit_2(tmp_path, capsys):
    assert main(["run", "--function", "nosuchfn", "--out", str(tmp_path)]) == 2
    assert "nosuchfn" in capsys.readouterr().err


def test_unknown_variant_exit_2(tmp_path, capsys):
    assert main(["run", "--variant", "zz", "--out", str(tmp_path)]) == 2
    assert "zz" in capsys.readouterr().err


def test_experiment_from_json(tmp_path):
    cfg = tmp_path / "e.json"
    cfg.write_text(json.dumps({
        "experiment": {"runs": 2, "budget_per_dim": 10, "dim": 2, "n_par": 5, "variants": ["spso2011", "c1"],
                       "reference_variant": "c1", "fit_restarts": 1},
        "functions": [{"name": "griewank", "bounds": "wide", "shifted": True}]}))
    out = tmp_path / "out"
    assert main(["experiment", "--config", str(cfg), "--out", str(out)]) == 0
    for name in ("summary.csv", "runs.csv", "significance.csv", "manifest.json", "traces/griewank.csv"):
        assert (out / name).exists()
    assert main(["significance", str(out / "runs.csv"), "--reference", "c1", "--out", str(tmp_path / "s.csv")]) == 0
    assert (tmp_path / "s.csv").exists()
    assert main(["significance", str(out / "runs.csv"), "--reference", "b"]) == 2


def test_experiment_config_errors(tmp_path, capsys):
    empty = tmp_path / "empty.toml"
    empty.write_text("[experiment]\nruns = 1\n")
    assert main(["experiment", "--config", str(empty), "--out", str(tmp_path / "o")]) == 2
    bad = tmp_path / "bad.toml"
    bad.write_text("[experiment]\nruns = \n")
    assert main(["experiment", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "line 2" in capsys.readouterr().err
    unknown = tmp_path / "u.toml"
    unknown.write_text('[experiment]\nbudget = 3\n[[functions]]\nname = "sphere"\n')
    assert main(["experiment", "--config", str(unknown), "--out", str(tmp_path / "o")]) == 2
    assert "budget" in capsys.readouterr().err


def test_illustrate_layout(tmp_path):
    out = tmp_path / "ill"
    assert main(["illustrate", "--out", str(out), "--seed", "0", "--fit-restarts", "3"]) == 0
    dirs = sorted(p.name for p in out.iterdir() if p.is_dir())
    assert dirs == ["iter_00", "iter_06", "iter_18"]
    for d in dirs:
        for kind in ("objective", "mean", "variance", "acquisition"):
            with open(out / d / f"grid_{kind}.csv", newline="") as fh:
                rows = list(csv.reader(fh))
            assert len(rows) == 65 and all(len(r) == 64 for r in rows)
        with open(out / d / "particles.csv", newline="") as fh:
            assert len(list(csv.reader(fh))) == 11
    meta6 = json.loads((out / "iter_06" / "snapshot.json").read_text())
    meta18 = json.loads((out / "iter_18" / "snapshot.json").read_text())
    assert meta6["evaluations"] == 70 and meta18["evaluations"] == 190
    assert meta18["incumbent_value"] <= meta6["incumbent_value"]
    assert len(meta18["exploration_target"]) == 2


def test_list_functions(capsys):
    assert main(["list-functions"]) == 0
    assert "schwefel" in capsys.readouterr().out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "gpswarm", "run", "--function", "bogus"], capture_output=True,
                         text=True)
    assert res.returncode == 2
    assert "bogus" in res.stderr


def test_significance_requires_arguments():
    with pytest.raises(SystemExit) as exc:
        main(["significance"])
    assert exc.value.code == 2
