"""Benchmark orchestration: paired-seed runs, regret tables and diagnostics.

Artifacts written by :func:`write_outputs` (all deterministic for a fixed
configuration):

``runs/<method>_b<batch>_s<seed>.json``
    ``{"method", "batch_size", "seed", "optimum", "sentinel", "trace"}``. The
    regret report is recomputed from these files alone.
``runs/<method>_b<batch>_s<seed>.csv``
    Trace rows, columns ``cpmes.TRACE_CSV_HEADER``.
``regret.csv``
    Long form: ``method, batch_size, budget, n_seeds, mean, ci95_half_width, values``.
``table_b<batch>.csv``
    One row per budget, one ``mean +- half width`` column per method.
``feasible_heatmap.csv``
    ``alpha, n_added, principal_objective, method`` for every feasible record.
``regret_components_b<batch>_s<seed>.csv``
    ``evaluation, r1, r2, r3, norm`` for each synthetic cPMES run.
``failures.json``
    Cells that raised, with the error message.
"""

from __future__ import annotations

import copy
import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from . import baselines, cpmes, marl, synthetic
from .cleanup import desk_config
from .core import ConfigurationError
from .cpmes import OptimizationTrace, ProblemConfig
from .surrogates import probability_of_feasibility_post

log = logging.getLogger(__name__)

RUNNERS = {
    "cpmes": cpmes.run,
    "cei": baselines.run_cei,
    "cmes": baselines.run_cmes,
    "mace": baselines.run_mace,
    "random": baselines.run_random,
}

HEATMAP_HEADER = ["alpha", "n_added", "principal_objective", "method"]
REGRET_HEADER = ["method", "batch_size", "budget", "n_seeds", "mean", "ci95_half_width", "values"]


class UnsupportedModeError(ConfigurationError):
    """Operation only defined for synthetic runs."""


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "synthetic"
    methods: tuple[str, ...] = ("cpmes", "cei", "cmes", "mace")
    budgets: tuple[int, ...] = (4, 8, 12, 16, 20)
    batch_sizes: tuple[int, ...] = (1,)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    output_dir: str | None = None
    problem: dict = field(default_factory=dict)  # ProblemConfig overrides
    env: dict = field(default_factory=dict)  # desk_config overrides (marl)
    train: dict = field(default_factory=dict)  # TrainConfig overrides (marl)
    workers: int = 1

    def __post_init__(self):
        for name in ("methods", "budgets", "batch_sizes", "seeds"):
            val = tuple(getattr(self, name))
            if not val:
                raise ConfigurationError(f"{name} must be non-empty")
            object.__setattr__(self, name, val)
        unknown = set(self.methods) - set(RUNNERS)
        if unknown:
            raise ConfigurationError(f"unknown methods {sorted(unknown)}")
        if self.mode not in ("synthetic", "marl"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if min(self.budgets) < 1 or min(self.batch_sizes) < 1:
            raise ConfigurationError("budgets and batch sizes must be positive")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        bad = {"seed", "budget", "batch_size", "mode"} & set(self.problem)
        if bad:
            raise ConfigurationError(f"set {sorted(bad)} through the experiment fields, not problem overrides")

    def problem_config(self, seed: int, batch_size: int) -> ProblemConfig:
        return ProblemConfig(
            seed=seed, budget=max(self.budgets), batch_size=batch_size, mode=self.mode, **self.problem
        )

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = set(cls.__dataclass_fields__)
        if set(d) - names:
            raise ConfigurationError(f"unknown experiment keys {sorted(set(d) - names)}")
        return cls(**d)


@dataclass(frozen=True)
class RegretCell:
    values: tuple[float, ...]

    @property
    def mean(self) -> float:
        return float(np.mean(self.values)) if self.values else math.nan

    @property
    def half_width(self) -> float:
        return ci_half_width(self.values)


def ci_half_width(values: Sequence[float], level: float = 0.95) -> float:
    """Student-t interval half width with ``n - 1`` degrees of freedom; nan for n < 2."""
    n = len(values)
    if n < 2:
        return math.nan
    sd = float(np.std(values, ddof=1))
    return float(stats.t.ppf(0.5 + level / 2, n - 1) * sd / math.sqrt(n))


@dataclass
class RegretReport:
    """Per (method, budget, batch) regret over seeds.

    In MARL mode there is no known optimum, so ``metric`` is
    ``"best_objective"`` and cells hold the best feasible welfare found.
    """

    cells: dict[tuple[str, int, int], RegretCell]
    metric: str = "regret"

    @property
    def methods(self) -> list[str]:
        return sorted({k[0] for k in self.cells})

    @property
    def budgets(self) -> list[int]:
        return sorted({k[1] for k in self.cells})

    @property
    def batch_sizes(self) -> list[int]:
        return sorted({k[2] for k in self.cells})

    def rows(self) -> list[list]:
        out = []
        for (m, T, b), cell in sorted(self.cells.items(), key=lambda kv: (kv[0][0], kv[0][2], kv[0][1])):
            out.append([m, b, T, len(cell.values), repr(cell.mean), repr(cell.half_width),
                        ";".join(repr(v) for v in cell.values)])
        return out

    def table(self, batch_size: int, methods: Sequence[str] | None = None) -> list[list[str]]:
        methods = list(methods or self.methods)
        rows = [["T_max"] + methods]
        for T in self.budgets:
            row = [str(T)]
            for m in methods:
                cell = self.cells.get((m, T, batch_size))
                row.append("failed" if cell is None or not cell.values else f"{cell.mean:.1f} +- {cell.half_width:.1f}")
            rows.append(row)
        return rows


@dataclass
class RunRecord:
    method: str
    batch_size: int
    seed: int
    trace: OptimizationTrace
    optimum: float | None
    sentinel: float | None

    def to_dict(self) -> dict:
        return {"method": self.method, "batch_size": self.batch_size, "seed": self.seed,
                "optimum": self.optimum, "sentinel": self.sentinel, "trace": self.trace.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(d["method"], d["batch_size"], d["seed"], OptimizationTrace.from_dict(d["trace"]),
                   d["optimum"], d["sentinel"])

    @property
    def name(self) -> str:
        return f"{self.method}_b{self.batch_size}_s{self.seed}"

    def metric_at(self, budget: int) -> float:
        if self.optimum is None:
            best = self.trace.best_feasible(budget)
            return math.nan if best is None else float(best)
        return cpmes.compute_regret(self.trace, self.optimum, (budget,), self.sentinel)[0]


@dataclass
class BenchmarkResult:
    config: ExperimentConfig
    report: RegretReport
    runs: list[RunRecord]
    failures: list[dict]
    components: dict[str, "RegretComponents"] = field(default_factory=dict)
    seconds: float = 0.0


def aggregate(runs: Sequence[RunRecord], budgets: Sequence[int]) -> RegretReport:
    """Pure reduction of archived runs into a report."""
    cells: dict[tuple[str, int, int], list[float]] = {}
    for r in sorted(runs, key=lambda r: (r.method, r.batch_size, r.seed)):
        for T in budgets:
            cells.setdefault((r.method, T, r.batch_size), []).append(r.metric_at(T))
    metric = "regret" if all(r.optimum is not None for r in runs) else "best_objective"
    return RegretReport({k: RegretCell(tuple(v)) for k, v in cells.items()}, metric)


def _seed_setup(config: ExperimentConfig, seed: int):
    """Evaluator plus the optimum and regret sentinel (None in MARL mode)."""
    if config.mode == "synthetic":
        p = config.problem_config(seed, 1)
        inst = synthetic.generate(seed, n_baseline=p.n_baseline, max_added=p.max_added,
                                  alpha_grid_size=p.alpha_grid_size)
        floor = min(inst.objective_table.values())
        opt = inst.optimum[1]
        return (lambda d, inst=inst: synthetic.evaluate(inst, d)), opt, opt - floor, inst
    env = desk_config(**config.env)
    tc = marl.TrainConfig.from_dict(config.train)
    p = config.problem_config(seed, 1)
    ev = marl.MarlEvaluator(env, tc, seed=seed, min_return=p.min_return)
    return ev, None, None, None


def _run_seed(config: ExperimentConfig, seed: int):
    evaluator, optimum, sentinel, inst = _seed_setup(config, seed)
    runs, failures, components = [], [], {}
    priors = cpmes.initialize_priors(config.problem_config(seed, 1), evaluator)
    for b in config.batch_sizes:
        pc = config.problem_config(seed, b)
        for m in config.methods:
            start = copy.deepcopy(priors)
            start.method = m
            try:
                trace = RUNNERS[m](pc, evaluator, trace=start)
            except Exception as exc:  # noqa: BLE001 - a crashed cell must not stop the others
                log.error("%s b=%d seed=%d failed: %s", m, b, seed, exc)
                failures.append({"method": m, "batch_size": b, "seed": seed, "error": f"{type(exc).__name__}: {exc}"})
                continue
            rec = RunRecord(m, b, seed, trace, optimum, sentinel)
            runs.append(rec)
            if m == "cpmes" and inst is not None:
                components[rec.name] = regret_components(trace, inst, pc)
    return runs, failures, components


def run_benchmark(config: ExperimentConfig) -> BenchmarkResult:
    """Every method on every seed and batch size, sharing priors per seed.

    Each method runs once with the largest budget; smaller budgets are read
    off the prefix of that trace, which makes every regret curve monotone.
    """
    t0 = time.perf_counter()
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            parts = list(pool.map(_run_seed, [config] * len(config.seeds), config.seeds))
    else:
        parts = [_run_seed(config, s) for s in config.seeds]
    runs, failures, components = [], [], {}
    for r, f, c in parts:
        runs += r
        failures += f
        components.update(c)
    report = aggregate(runs, config.budgets)
    return BenchmarkResult(config, report, runs, failures, components, time.perf_counter() - t0)


# ---------------------------------------------------------------- exports


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def emit_feasible_heatmap(traces: Sequence[OptimizationTrace], path: Path | str | None = None) -> list[list]:
    """One row per feasible record across ``traces``."""
    rows = [
        [repr(r.design.alpha), r.design.n_added, repr(r.principal_objective), t.method]
        for t in traces for r in t.records if r.feasible
    ]
    if path is not None:
        _write_csv(Path(path), HEATMAP_HEADER, rows)
    return rows


def write_trace_csv(trace: OptimizationTrace, path: Path | str):
    _write_csv(Path(path), cpmes.TRACE_CSV_HEADER, trace.to_csv_rows())


def write_report(report: RegretReport, out: Path):
    _write_csv(out / "regret.csv", REGRET_HEADER, report.rows())
    for b in report.batch_sizes:
        table = report.table(b)
        _write_csv(out / f"table_b{b}.csv", table[0], table[1:])


def write_outputs(result: BenchmarkResult, out: Path | str):
    out = Path(out)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(result.config.to_dict(), indent=1, sort_keys=True))
    for r in result.runs:
        (out / "runs" / f"{r.name}.json").write_text(json.dumps(r.to_dict(), sort_keys=True))
        write_trace_csv(r.trace, out / "runs" / f"{r.name}.csv")
    write_report(result.report, out)
    emit_feasible_heatmap([r.trace for r in result.runs], out / "feasible_heatmap.csv")
    for name, comp in sorted(result.components.items()):
        comp.to_csv(out / f"regret_components_{name.removeprefix('cpmes_')}.csv")
    (out / "failures.json").write_text(json.dumps(result.failures, indent=1))


def load_runs(directory: Path | str) -> list[RunRecord]:
    return [RunRecord.from_dict(json.loads(p.read_text())) for p in sorted(Path(directory).glob("*.json"))]


# ---------------------------------------------------------------- regret components


@dataclass(frozen=True)
class RegretComponents:
    """Cumulative regret components after each post-prior evaluation."""

    r1: np.ndarray
    r2: np.ndarray
    r3: np.ndarray
    gaps: np.ndarray  # (T, 3) per-step terms

    @property
    def norm(self) -> np.ndarray:
        return np.sqrt(self.r1**2 + self.r2**2 + self.r3**2)

    @property
    def t(self) -> np.ndarray:
        return np.arange(1, len(self.r1) + 1)

    def growth_slope(self, t_min: int = 5, t_max: int = 20) -> float:
        """Least-squares slope of ``log ||R||`` against ``log t`` on ``[t_min, t_max]``."""
        t, n = self.t, self.norm
        keep = (t >= t_min) & (t <= t_max) & (n > 0)
        if keep.sum() < 2:
            return math.nan
        return float(np.polyfit(np.log(t[keep]), np.log(n[keep]), 1)[0])

    def rows(self) -> list[list]:
        return [[int(t), repr(float(a)), repr(float(b)), repr(float(c)), repr(float(n))]
                for t, a, b, c, n in zip(self.t, self.r1, self.r2, self.r3, self.norm)]

    def to_csv(self, path: Path | str):
        _write_csv(Path(path), ["evaluation", "r1", "r2", "r3", "norm"], self.rows())


def regret_components(
    trace: OptimizationTrace, instance: synthetic.SyntheticInstance, config: ProblemConfig
) -> RegretComponents:
    """Objective, indicator and IR-probability regret against the true optimum.

    The third term compares the true 0/1 IR satisfaction at the optimum with
    the surrogate probability, using surrogates fitted on the data available
    before each evaluation.
    """
    if config.mode != "synthetic":
        raise UnsupportedModeError("regret components need a known optimum (synthetic mode)")
    x_star, g_star = instance.optimum
    phi_star = instance.phi_table[x_star]
    ir_true = np.array([float(s >= 0.0) for s in instance.ir_table[x_star]])
    recs = trace.records
    gaps = np.zeros((trace.n_evaluations, 3))
    cached: dict[int, np.ndarray] = {}
    for t in range(trace.n_evaluations):
        i = trace.n_priors + t
        rec = recs[i]
        gaps[t, 0] = g_star - rec.principal_objective
        gaps[t, 1] = phi_star - rec.feasibility_indicator
        # batch members share the data they were chosen from
        n_avail = i - _position_in_round(trace, i)
        if n_avail not in cached:
            sur = cpmes.fit_surrogates(recs[:n_avail], config, trace.rounds[i])
            cached[n_avail] = np.array([
                probability_of_feasibility_post(g.predict(x_star), 0.0) for g in sur.ir
            ])
        gaps[t, 2] = float(np.sum(ir_true - cached[n_avail]))
    c = np.cumsum(gaps, axis=0)
    return RegretComponents(c[:, 0], c[:, 1], c[:, 2], gaps)


def _position_in_round(trace: OptimizationTrace, i: int) -> int:
    k = 0
    while i - k - 1 >= trace.n_priors and trace.rounds[i - k - 1] == trace.rounds[i]:
        k += 1
    return k


__all__ = [
    "ExperimentConfig", "RegretCell", "RegretReport", "RunRecord", "BenchmarkResult", "RegretComponents",
    "UnsupportedModeError", "run_benchmark", "aggregate", "emit_feasible_heatmap", "regret_components",
    "write_outputs", "write_report", "write_trace_csv", "load_runs", "ci_half_width",
]
