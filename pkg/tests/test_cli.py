import json
import subprocess
import sys

import pytest

from contract_bo import harness
from contract_bo.cli import main

SMALL = {"alpha_grid_size": 21, "optimize_hyperparameters": False, "nsga_population": 20, "nsga_generations": 5}


@pytest.fixture
def problem_file(tmp_path):
    p = tmp_path / "problem.json"
    p.write_text(json.dumps(SMALL))
    return p


@pytest.fixture
def bench_file(tmp_path):
    p = tmp_path / "bench.json"
    p.write_text(json.dumps({"methods": ["cpmes", "cei"], "budgets": [2, 3], "seeds": [0, 1], "problem": SMALL}))
    return p


def test_bench_then_report(bench_file, tmp_path, capsys):
    out = tmp_path / "b"
    assert main(["bench", "--config", str(bench_file), "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "regret (batch 1)" in text and "log-log slope" in text
    original = (out / "regret.csv").read_bytes()
    assert main(["report", str(out / "runs"), "--budgets", "2,3", "--out", str(tmp_path / "r")]) == 0
    assert (tmp_path / "r" / "regret.csv").read_bytes() == original


def test_bench_failure_exit_code(bench_file, tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise RuntimeError("bad cell")

    monkeypatch.setitem(harness.RUNNERS, "cei", boom)
    out = tmp_path / "b"
    assert main(["bench", "--config", str(bench_file), "--seeds", "0", "--out", str(out)]) == 1
    assert "FAILED cei" in capsys.readouterr().err
    assert main(["report", str(out / "runs")]) == 1


def test_optimize_and_resume(problem_file, tmp_path, capsys):
    out = tmp_path / "o"
    args = ["optimize", "--method", "cpmes", "--seed", "2", "--config", str(problem_file), "--out", str(out)]
    assert main(args + ["--budget", "2"]) == 0
    assert "true optimum" in capsys.readouterr().out
    lines = (out / "trace.csv").read_text().splitlines()
    assert len(lines) == 1 + 5 + 2
    snap = json.loads((out / "snapshot.json").read_text())
    snap["config"]["budget"] = 4
    (tmp_path / "s.json").write_text(json.dumps(snap))
    out2 = tmp_path / "o2"
    assert main(["optimize", "--resume", str(tmp_path / "s.json"), "--out", str(out2)]) == 0
    lines2 = (out2 / "trace.csv").read_text().splitlines()
    assert len(lines2) == 1 + 5 + 4 and lines2[:8] == lines


def test_train_and_baseline(tmp_path, capsys):
    tr = tmp_path / "train.json"
    tr.write_text(json.dumps({"eval_episodes": 1}))
    base = tmp_path / "base"
    assert main(["train", "--episodes", "3", "--train", str(tr), "--out", str(base)]) == 0
    assert main(["train", "--alpha", "0.2", "--n-added", "1", "--episodes", "3", "--train", str(tr),
                 "--baseline", str(base / "report.json"), "--out", str(tmp_path / "c")]) == 0
    text = capsys.readouterr().out
    assert "ir_slack=" in text and "welfare=" in text
    assert (tmp_path / "c" / "curve.csv").exists()


@pytest.mark.parametrize("argv", [
    ["train", "--alpha", "0.05", "--n-added", "0", "--episodes", "2"],
    ["optimize", "--budget", "0"],
])
def test_usage_errors(argv, capsys, tmp_path):
    assert main(argv + ["--out", str(tmp_path / "z")]) == 2
    assert "error:" in capsys.readouterr().err


def test_bad_list_argument():
    with pytest.raises(SystemExit):
        main(["report", "runs", "--budgets", "x"])


def test_missing_config_file(capsys):
    assert main(["bench", "--config", "/nonexistent.json"]) == 2


def test_report_empty_dir(tmp_path):
    assert main(["report", str(tmp_path)]) == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "contract_bo", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for verb in ("bench", "optimize", "train", "report"):
        assert verb in res.stdout
