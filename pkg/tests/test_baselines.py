from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from contract_bo import baselines, synthetic
from contract_bo.core import DesignPoint, EvaluationRecord
from contract_bo.cpmes import OptimizationTrace, ProblemConfig, RoundContext, initialize_priors

GRID = 21
RUNS = {
    "cei": baselines.run_cei,
    "cmes": baselines.run_cmes,
    "mace": baselines.run_mace,
    "random": baselines.run_random,
}


@pytest.fixture(scope="module")
def instance():
    return synthetic.generate(1, alpha_grid_size=GRID)


@pytest.fixture(scope="module")
def config():
    return ProblemConfig(seed=1, alpha_grid_size=GRID, budget=5, optimize_hyperparameters=False,
                         nsga_population=20, nsga_generations=5)


def ev(inst):
    return lambda d: synthetic.evaluate(inst, d)


@pytest.mark.parametrize("name", sorted(RUNS))
def test_budget_no_repeats_and_determinism(name, config, instance):
    a = RUNS[name](config, ev(instance))
    b = RUNS[name](config, ev(instance))
    assert a.n_evaluations == 5
    designs = [r.design for r in a.records]
    assert len(set(designs)) == len(designs)
    assert a.to_csv_rows() == b.to_csv_rows()
    assert a.method == name


@pytest.mark.parametrize("name", sorted(RUNS))
def test_shared_priors(name, config, instance):
    priors = initialize_priors(config, ev(instance))
    tr = RUNS[name](config, ev(instance))
    assert tr.records[: tr.n_priors] == priors.records


@pytest.mark.parametrize("name", sorted(RUNS))
def test_exhausts_tiny_lattice(name):
    # 2 x 4 lattice: 5 priors leave 3 designs, so a budget of 6 stops at 3
    lattice = [DesignPoint(a, n) for a in (0.0, 1.0) for n in range(4)]
    table = {d: EvaluationRecord(d, float(i), (1.0,) * 5, 1) for i, d in enumerate(lattice)}
    cfg = ProblemConfig(alpha_grid_size=2, budget=6, optimize_hyperparameters=False,
                        nsga_population=4, nsga_generations=2)
    tr = RUNS[name](cfg, table.__getitem__)
    assert tr.n_evaluations == 3
    assert {r.design for r in tr.records} == set(lattice)


def ctx_for(config, trace, k=1, seed=0):
    return RoundContext(config, trace, config.lattice(), 1, k, np.random.default_rng(seed))


def test_cei_single_unevaluated(config, instance):
    lattice = config.lattice()
    trace = OptimizationTrace(method="cei")
    for d in lattice[:-1]:
        trace.append(synthetic.evaluate(instance, d), 0)
    trace.n_priors = len(trace.records)
    got, _ = baselines.propose_cei(ctx_for(config, trace))
    assert got == [lattice[-1]]


def test_cei_without_incumbent_falls_back_to_pof(config):
    # every observation infeasible: the proposal rule falls back to feasibility
    lattice = config.lattice()
    trace = OptimizationTrace(method="cei")
    for i, d in enumerate(lattice[::9]):
        trace.append(EvaluationRecord(d, float(i), (-1.0,) * 5, 1), 0)
    trace.n_priors = len(trace.records)
    got, fallback = baselines.propose_cei(ctx_for(config, trace))
    assert fallback and len(got) == 1 and got[0] not in trace.evaluated


def test_mace_batch_size_override(config, instance):
    tr = baselines.run_mace(config, ev(instance), batch_size=2)
    r = tr.rounds[tr.n_priors:]
    assert max(r.count(k) for k in set(r)) <= 2


def test_uniform_pick_small_front():
    cand = [DesignPoint(0.1, 1), DesignPoint(0.2, 1)]
    assert baselines.uniform_pick(cand, 4, np.random.default_rng(0)) == cand


def test_uniform_pick_histogram():
    cand = [DesignPoint(a, 1) for a in (0.1, 0.2, 0.3, 0.4)]
    rng = np.random.default_rng(2024)
    counts = np.zeros(4)
    for _ in range(10_000):
        counts[cand.index(baselines.uniform_pick(cand, 1, rng)[0])] += 1
    assert stats.chisquare(counts).pvalue > 0.01


def test_uniform_pick_distinct():
    cand = [DesignPoint(a / 10, 2) for a in range(10)]
    got = baselines.uniform_pick(cand, 4, np.random.default_rng(1))
    assert len(set(got)) == 4


def test_batch_random_budget(config, instance):
    tr = baselines.run_random(replace(config, batch_size=4, budget=9), ev(instance))
    assert tr.n_evaluations == 9
