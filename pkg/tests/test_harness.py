import csv
import math

import numpy as np
import pytest
from scipy import stats

from contract_bo import harness, synthetic
from contract_bo.core import ConfigurationError, DesignPoint, EvaluationRecord
from contract_bo.cpmes import OptimizationTrace, ProblemConfig
from contract_bo.harness import ExperimentConfig, RegretCell, RegretReport, RunRecord

SMALL = {"alpha_grid_size": 21, "optimize_hyperparameters": False, "nsga_population": 20, "nsga_generations": 5}


def small_config(**kw):
    base = dict(methods=("cpmes", "random"), budgets=(2, 4), seeds=(0, 1), problem=SMALL)
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def result():
    return harness.run_benchmark(small_config())


class TestConfig:
    @pytest.mark.parametrize("kw", [
        {"methods": ()},
        {"methods": ("cpmes", "magic")},
        {"mode": "grid"},
        {"budgets": (0, 4)},
        {"workers": 0},
        {"problem": {"seed": 3}},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ConfigurationError):
            small_config(**kw)

    def test_round_trip(self):
        cfg = small_config()
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict({"method": ["cpmes"]})

    def test_problem_config(self):
        pc = small_config().problem_config(3, 2)
        assert (pc.seed, pc.budget, pc.batch_size, pc.alpha_grid_size) == (3, 4, 2, 21)


class TestInterval:
    def test_formula(self):
        v = [1.0, 2.0, 4.0, 8.0, 9.0]
        expect = stats.t.ppf(0.975, 4) * np.std(v, ddof=1) / math.sqrt(5)
        assert harness.ci_half_width(v) == pytest.approx(expect, rel=1e-12)

    def test_degenerate(self):
        assert math.isnan(harness.ci_half_width([3.0]))
        assert harness.ci_half_width([2.0, 2.0, 2.0]) == 0.0

    def test_table_marks_missing(self):
        rep = RegretReport({("a", 4, 1): RegretCell((1.0, 3.0)), ("b", 4, 1): RegretCell(())})
        tab = rep.table(1)
        assert tab[0] == ["T_max", "a", "b"]
        assert tab[1][0] == "4" and tab[1][1].startswith("2.0 +- ") and tab[1][2] == "failed"


class TestBenchmark:
    def test_cells(self, result):
        rep = result.report
        assert rep.metric == "regret"
        assert set(rep.cells) == {(m, T, 1) for m in ("cpmes", "random") for T in (2, 4)}
        assert all(len(c.values) == 2 for c in rep.cells.values())
        assert not result.failures

    def test_paired_priors(self, result):
        by = {(r.method, r.seed): r.trace for r in result.runs}
        for s in (0, 1):
            a, b = by[("cpmes", s)], by[("random", s)]
            assert a.records[: a.n_priors] == b.records[: b.n_priors]

    def test_regret_monotone_and_bounded(self, result):
        for r in result.runs:
            vals = [r.metric_at(T) for T in (1, 2, 3, 4)]
            assert all(a >= b for a, b in zip(vals, vals[1:]))
            assert all(0.0 <= v <= r.sentinel for v in vals)

    def test_components_only_for_cpmes(self, result):
        assert sorted(result.components) == ["cpmes_b1_s0", "cpmes_b1_s1"]

    def test_outputs_and_report(self, result, tmp_path):
        harness.write_outputs(result, tmp_path)
        names = {p.name for p in tmp_path.iterdir()}
        assert {"regret.csv", "table_b1.csv", "feasible_heatmap.csv", "failures.json", "config.json", "runs"} <= names
        assert "regret_components_b1_s0.csv" in names
        runs = harness.load_runs(tmp_path / "runs")
        again = harness.aggregate(runs, (2, 4))
        assert again.rows() == result.report.rows()

    def test_deterministic_bytes(self, result, tmp_path):
        harness.write_outputs(result, tmp_path / "a")
        harness.write_outputs(harness.run_benchmark(small_config()), tmp_path / "b")
        for name in ("regret.csv", "feasible_heatmap.csv", "runs/cpmes_b1_s0.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_failed_cell_isolated(self, monkeypatch):
        def boom(*a, **k):
            raise RuntimeError("solver exploded")

        monkeypatch.setitem(harness.RUNNERS, "random", boom)
        res = harness.run_benchmark(small_config(seeds=(0,)))
        assert [f["method"] for f in res.failures] == ["random"]
        assert "solver exploded" in res.failures[0]["error"]
        assert res.report.table(1)[1][1] != "failed"
        assert {k[0] for k in res.report.cells} == {"cpmes"}

    def test_parallel_matches_serial(self, result):
        par = harness.run_benchmark(small_config(workers=2))
        assert par.report.rows() == result.report.rows()


class TestHeatmap:
    def test_empty(self, tmp_path):
        assert harness.emit_feasible_heatmap([], tmp_path / "h.csv") == []
        assert (tmp_path / "h.csv").read_text() == ",".join(harness.HEATMAP_HEADER) + "\n"

    def test_rows_match_feasible_records(self, result, tmp_path):
        traces = [r.trace for r in result.runs]
        rows = harness.emit_feasible_heatmap(traces, tmp_path / "h.csv")
        assert len(rows) == sum(r.feasible for t in traces for r in t.records)
        with open(tmp_path / "h.csv") as fh:
            parsed = list(csv.reader(fh))[1:]
        assert len(parsed) == len(rows)
        assert {row[3] for row in parsed} <= {"cpmes", "random"}


class TestComponents:
    @pytest.fixture(scope="class")
    @staticmethod
    def inst():
        return synthetic.generate(0, alpha_grid_size=21)

    def optimum_trace(self, inst, n=4):
        x, _ = inst.optimum
        priors = [synthetic.evaluate(inst, d) for d in inst.lattice[:3]]
        rec = synthetic.evaluate(inst, x)
        return OptimizationTrace(priors + [rec] * n, n_priors=3, rounds=[0] * 3 + list(range(1, n + 1)))

    def test_zero_gaps_at_optimum(self, inst):
        comp = harness.regret_components(self.optimum_trace(inst), inst, ProblemConfig(**SMALL))
        assert np.all(comp.r1 == 0.0) and np.all(comp.r2 == 0.0)
        assert np.all(np.diff(comp.t) == 1)

    def test_third_term_bounded(self, inst):
        comp = harness.regret_components(self.optimum_trace(inst), inst, ProblemConfig(**SMALL))
        n_ir = len(inst.ir_table[inst.optimum[0]])
        assert np.all(np.abs(comp.gaps[:, 2]) <= n_ir)

    def test_marl_mode_rejected(self, inst):
        with pytest.raises(harness.UnsupportedModeError):
            harness.regret_components(self.optimum_trace(inst), inst, ProblemConfig(mode="marl", **SMALL))

    def test_slope(self):
        t = np.arange(1, 31, dtype=float)
        comp = harness.RegretComponents(3 * np.sqrt(t), 4 * np.sqrt(t), np.zeros(30), np.zeros((30, 3)))
        assert comp.growth_slope() == pytest.approx(0.5)
        assert comp.norm[3] == pytest.approx(10.0)

    def test_csv(self, tmp_path):
        comp = harness.RegretComponents(np.ones(3), np.zeros(3), np.zeros(3), np.zeros((3, 3)))
        comp.to_csv(tmp_path / "c.csv")
        lines = (tmp_path / "c.csv").read_text().splitlines()
        assert lines[0] == "evaluation,r1,r2,r3,norm" and lines[1] == "1,1.0,0.0,0.0,1.0"


def test_marl_metric_is_best_objective():
    d = DesignPoint(0.1, 1)
    tr = OptimizationTrace([EvaluationRecord(d, 5.0, (0.0,), 1), EvaluationRecord(DesignPoint(0.2, 1), 9.0, (0.1,), 1)],
                           n_priors=1, rounds=[0, 1])
    rec = RunRecord("cpmes", 1, 0, tr, None, None)
    assert rec.metric_at(1) == 9.0
    assert harness.aggregate([rec], (1,)).metric == "best_objective"
