"""Constrained Pareto max-value entropy search outer loop.

Each round fits one GP to the principal objective, one per baseline-agent IR
slack and one to the recruited-agent feasibility indicator, builds the cheap
three-objective problem

    (UCB of objective, UCB of indicator, prod_j P(IR_j >= 0))

solves it with NSGA-II, and evaluates the front members with the highest
feasibility-weighted max-value entropy score.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import acquisition as acq
from .core import ConfigurationError, DesignPoint, EvaluationRecord, Evaluator, design_lattice, no_idle_tax
from .pareto import NSGA2Config, ParetoFront, nsga2
from .surrogates import Dataset, FittedGP, GPPosterior, KernelSpec, fit, probability_of_feasibility_post

log = logging.getLogger(__name__)

PHI_THRESHOLD = 0.5
REGRET_CHECKPOINTS = (4, 8, 12, 16, 20)


@dataclass(frozen=True)
class ProblemConfig:
    n_baseline: int = 5
    max_added: int = 3
    min_return: float = 0.0
    budget: int = 20
    batch_size: int = 1
    seed: int = 0
    mode: str = "synthetic"  # or "marl"
    alpha_grid_size: int = 101
    max_value_samples: int = 10
    delta: float = 0.1
    optimize_hyperparameters: bool = True
    gp_restarts: int = 8
    noise_variance: float | None = None  # None: mode default
    phi_constant: float = 1.0
    nsga_population: int = 100
    nsga_generations: int = 50
    exhaustive_front: bool = False
    grid_subset: int = 512  # max-value sampling grid size in marl mode

    def __post_init__(self):
        if self.budget < 1:
            raise ConfigurationError("budget must be >= 1")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.n_baseline < 1:
            raise ConfigurationError("n_baseline must be >= 1")
        if self.mode not in ("synthetic", "marl"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")

    @property
    def noise(self) -> float:
        if self.noise_variance is not None:
            return self.noise_variance
        return 1e-6 if self.mode == "synthetic" else 1e-2

    def lattice(self) -> list[DesignPoint]:
        full = design_lattice(self.alpha_grid_size, self.max_added)
        if self.mode == "marl":
            return [d for d in full if d == no_idle_tax(d)]
        return full

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigurationError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)


@dataclass
class OptimizationTrace:
    records: list[EvaluationRecord] = field(default_factory=list)
    n_priors: int = 0
    rounds: list[int] = field(default_factory=list)  # round index per record, 0 for priors
    fallbacks: list[int] = field(default_factory=list)  # rounds that used a fallback rule
    method: str = "cpmes"

    @property
    def evaluated(self) -> set[DesignPoint]:
        return {r.design for r in self.records}

    @property
    def n_evaluations(self) -> int:
        return len(self.records) - self.n_priors

    def append(self, rec: EvaluationRecord, round_index: int):
        self.records.append(rec)
        self.rounds.append(round_index)

    def best_feasible(self, upto: int | None = None) -> float | None:
        """Best feasible objective among priors plus the first ``upto`` evaluations."""
        recs = self.records if upto is None else self.records[: self.n_priors + upto]
        vals = [r.principal_objective for r in recs if r.feasible]
        return max(vals) if vals else None

    @property
    def best_feasible_so_far(self) -> list[tuple[int, float | None]]:
        return [(t, self.best_feasible(t)) for t in range(self.n_evaluations + 1)]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "n_priors": self.n_priors,
            "rounds": list(self.rounds),
            "fallbacks": list(self.fallbacks),
            "records": [r.to_dict() for r in self.records],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizationTrace":
        return cls(
            [EvaluationRecord.from_dict(r) for r in d["records"]],
            d["n_priors"],
            list(d["rounds"]),
            list(d["fallbacks"]),
            d.get("method", "cpmes"),
        )

    def to_csv_rows(self) -> list[list]:
        rows = []
        for i, (r, k) in enumerate(zip(self.records, self.rounds)):
            t = i - self.n_priors + 1 if i >= self.n_priors else 0
            best = self.best_feasible(max(t, 0))
            rows.append(
                [self.method, i, t, k, repr(r.design.alpha), r.design.n_added, repr(r.principal_objective),
                 ";".join(repr(s) for s in r.ir_slack_baseline), r.feasibility_indicator, int(r.feasible),
                 "" if best is None else repr(best)]
            )
        return rows


TRACE_CSV_HEADER = [
    "method", "index", "evaluation", "round", "alpha", "n_added", "principal_objective",
    "ir_slack_baseline", "feasibility_indicator", "feasible", "best_feasible_so_far",
]


class RunAborted(RuntimeError):
    def __init__(self, message: str, trace: OptimizationTrace):
        super().__init__(message)
        self.trace = trace


def _rng(config: ProblemConfig, *tags: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([config.seed, *tags]))


def _evaluate(evaluator: Evaluator, design: DesignPoint, trace: OptimizationTrace, snapshot: Path | None, config):
    try:
        return evaluator(design)
    except Exception as exc:  # noqa: BLE001 - any evaluator failure aborts the run
        if snapshot is not None:
            save_snapshot(snapshot, config, trace)
        raise RunAborted(f"evaluator failed at {design}: {exc}", trace) from exc


def initialize_priors(
    config: ProblemConfig, evaluator: Evaluator, snapshot: Path | None = None, method: str = "cpmes"
) -> OptimizationTrace:
    """Evaluate the seeded initial designs.

    Synthetic mode: both lattice corners plus three random lattice designs.
    MARL mode: ten random lattice designs.
    """
    lattice = config.lattice()
    rng = _rng(config, 1)
    if config.mode == "synthetic":
        corners = [DesignPoint(0.0, 0), DesignPoint(1.0, config.max_added)]
        rest = [d for d in lattice if d not in corners]
        picks = rng.choice(len(rest), size=3, replace=False)
        designs = corners + [rest[i] for i in sorted(picks)]
    else:
        picks = rng.choice(len(lattice), size=min(10, len(lattice)), replace=False)
        designs = [lattice[i] for i in sorted(picks)]
    trace = OptimizationTrace(method=method)
    for d in designs:
        trace.append(_evaluate(evaluator, d, trace, snapshot, config), 0)
    trace.n_priors = len(trace.records)
    return trace


@dataclass(frozen=True)
class Surrogates:
    objective: FittedGP
    ir: tuple[FittedGP, ...]
    phi: FittedGP

    def posteriors(self, points: Sequence[DesignPoint]):
        obj = self.objective.predict_many(points)
        ir = [g.predict_many(points) for g in self.ir]
        phi = self.phi.predict_many(points)
        return obj, ir, phi

    def constraint_posteriors(self, points):
        """Indicator posterior followed by the IR posteriors, with matching thresholds."""
        _, ir, phi = self.posteriors(points)
        return [phi] + ir, [PHI_THRESHOLD] + [0.0] * len(ir)


def fit_surrogates(records: Sequence[EvaluationRecord], config: ProblemConfig, round_index: int = 0) -> Surrogates:
    pts = tuple(r.design for r in records)
    noise = config.noise
    kw = dict(
        max_added=config.max_added,
        optimize_hyperparameters=config.optimize_hyperparameters,
        restarts=config.gp_restarts,
    )
    se = KernelSpec("se_product", (1.0, 1.0))
    objective = fit(
        Dataset(pts, tuple(r.principal_objective for r in records), noise), se,
        standardize=True, seed=config.seed * 1000 + round_index, **kw,
    )
    ir = tuple(
        fit(
            Dataset(pts, tuple(r.ir_slack_baseline[j] for r in records), noise), se,
            standardize=True, seed=config.seed * 1000 + round_index + 17 * (j + 1), **kw,
        )
        for j in range(config.n_baseline)
    )
    matern = KernelSpec("matern_product_const", (1.0, 1.0), 1.0, config.phi_constant)
    phi = fit(
        Dataset(pts, tuple(float(r.feasibility_indicator) for r in records), noise), matern,
        standardize=False, seed=config.seed * 1000 + round_index + 7, **kw,
    )
    return Surrogates(objective, ir, phi)


class MOObjectives:
    """The cheap three-objective problem for one round; memoized per design."""

    def __init__(self, surrogates: Surrogates, beta: float):
        self.surrogates = surrogates
        self.beta = beta
        self._cache: dict[DesignPoint, np.ndarray] = {}

    def table(self, points: Sequence[DesignPoint]) -> np.ndarray:
        obj, ir, phi = self.surrogates.posteriors(points)
        out = np.empty((len(points), 3))
        out[:, 0] = acq.ucb(obj, self.beta)
        out[:, 1] = acq.ucb(phi, self.beta)
        out[:, 2] = np.asarray(acq.feasibility_weight(ir, 0.0)) * np.ones(len(points))
        return out

    def prefill(self, points: Sequence[DesignPoint]):
        for d, row in zip(points, self.table(points)):
            self._cache[d] = row

    def __call__(self, d: DesignPoint) -> np.ndarray:
        if d not in self._cache:
            self._cache[d] = self.table([d])[0]
        return self._cache[d]


def build_mo_objectives(surrogates: Surrogates, t: int, schedule: acq.BetaSchedule) -> MOObjectives:
    return MOObjectives(surrogates, schedule.beta(t))


def _variance_fallback(surrogates: Surrogates, lattice, evaluated, k: int) -> list[DesignPoint]:
    cand = [d for d in lattice if d not in evaluated]
    if not cand:
        return []
    var = np.asarray(surrogates.objective.predict_many(cand).variance)
    order = sorted(range(len(cand)), key=lambda i: (-var[i], cand[i]))
    return [cand[i] for i in order[:k]]


def cmes_scores(surrogates: Surrogates, designs: Sequence[DesignPoint], maxima: acq.MaxValueSamples) -> np.ndarray:
    obj, ir, phi = surrogates.posteriors(designs)
    return np.atleast_1d(acq.cmes_score(obj, [phi] + ir, maxima, [PHI_THRESHOLD] + [0.0] * len(ir)))


def select_next(
    front: ParetoFront,
    surrogates: Surrogates,
    maxima: acq.MaxValueSamples,
    batch_size: int,
    evaluated: set[DesignPoint] = frozenset(),
    lattice: Sequence[DesignPoint] = (),
) -> tuple[list[DesignPoint], bool]:
    """Top ``batch_size`` unevaluated front members by cMES score.

    Returns ``(designs, used_fallback)``. Ties go to lower alpha, then lower
    recruitment. If every front member was already evaluated, the
    highest-variance unevaluated lattice designs are returned instead.
    """
    cand = [d for d in front.designs if d not in evaluated]
    if not cand:
        log.info("front fully evaluated; falling back to posterior variance")
        return _variance_fallback(surrogates, lattice, evaluated, batch_size), True
    scores = cmes_scores(surrogates, cand, maxima)
    order = sorted(range(len(cand)), key=lambda i: (-scores[i], cand[i]))
    return [cand[i] for i in order[:batch_size]], False


@dataclass
class RoundContext:
    config: ProblemConfig
    trace: OptimizationTrace
    lattice: list[DesignPoint]
    round_index: int
    k: int  # designs requested this round
    rng: np.random.Generator

    @property
    def evaluated(self) -> set[DesignPoint]:
        return self.trace.evaluated

    def surrogates(self) -> Surrogates:
        return fit_surrogates(self.trace.records, self.config, self.round_index)

    def grid(self) -> list[DesignPoint]:
        if self.config.mode == "synthetic" or len(self.lattice) <= self.config.grid_subset:
            return self.lattice
        idx = self.rng.choice(len(self.lattice), self.config.grid_subset, replace=False)
        return [self.lattice[i] for i in sorted(idx)]

    def nsga_config(self, seed: int) -> NSGA2Config:
        c = self.config
        return NSGA2Config(
            population_size=c.nsga_population, generations=c.nsga_generations, seed=seed,
            max_added=c.max_added, alpha_grid_size=c.alpha_grid_size, exhaustive=c.exhaustive_front,
            repair=no_idle_tax if c.mode == "marl" else None,
        )


Proposer = Callable[[RoundContext], tuple[list[DesignPoint], bool]]


def propose_cpmes(ctx: RoundContext) -> tuple[list[DesignPoint], bool]:
    sur = ctx.surrogates()
    mo = build_mo_objectives(sur, ctx.round_index, acq.BetaSchedule(ctx.config.delta, 2))
    mo.prefill(ctx.lattice)
    front = nsga2(mo, ctx.nsga_config(int(ctx.rng.integers(2**31))))
    maxima = acq.sample_max_values(sur.objective, ctx.grid(), ctx.config.max_value_samples, ctx.rng)
    return select_next(front, sur, maxima, ctx.k, ctx.evaluated, ctx.lattice)


def bo_loop(
    config: ProblemConfig,
    evaluator: Evaluator,
    propose: Proposer,
    method: str,
    trace: OptimizationTrace | None = None,
    snapshot: Path | None = None,
) -> OptimizationTrace:
    """Shared round structure: propose up to ``batch_size`` designs, evaluate, repeat.

    Rounds continue until exactly ``budget`` post-prior evaluations have been
    made or no unevaluated lattice design remains. Passing a partial
    ``trace`` resumes it.
    """
    if trace is None:
        trace = initialize_priors(config, evaluator, snapshot, method)
    lattice = config.lattice()
    round_index = max(trace.rounds, default=0)
    while trace.n_evaluations < config.budget:
        round_index += 1
        k = min(config.batch_size, config.budget - trace.n_evaluations)
        ctx = RoundContext(config, trace, lattice, round_index, k, _rng(config, 2, round_index))
        designs, fallback = propose(ctx)
        designs = [d for d in dict.fromkeys(designs) if d not in trace.evaluated][:k]
        if fallback:
            trace.fallbacks.append(round_index)
        if not designs:
            log.warning("%s: no unevaluated design left after %d evaluations", method, trace.n_evaluations)
            break
        for d in designs:
            trace.append(_evaluate(evaluator, d, trace, snapshot, config), round_index)
        if snapshot is not None:
            save_snapshot(snapshot, config, trace)
    return trace


def run(
    config: ProblemConfig,
    evaluator: Evaluator,
    trace: OptimizationTrace | None = None,
    snapshot: Path | None = None,
) -> OptimizationTrace:
    return bo_loop(config, evaluator, propose_cpmes, "cpmes", trace, snapshot)


def compute_regret(
    trace: OptimizationTrace,
    true_optimum: float,
    checkpoints: Sequence[int] = REGRET_CHECKPOINTS,
    sentinel: float | None = None,
) -> list[float]:
    """``|best feasible objective within T evaluations - optimum|`` per checkpoint.

    Priors count toward "found so far". When nothing feasible was seen the
    regret is ``sentinel`` (defaults to ``|optimum|``, i.e. a found value of 0).
    """
    out = []
    for T in checkpoints:
        best = trace.best_feasible(T)
        if best is None:
            out.append(float(sentinel if sentinel is not None else abs(true_optimum)))
        else:
            out.append(abs(best - true_optimum))
    return out


def save_snapshot(path: Path | str, config: ProblemConfig, trace: OptimizationTrace):
    Path(path).write_text(json.dumps({"config": config.to_dict(), "trace": trace.to_dict()}, indent=1))


def load_snapshot(path: Path | str) -> tuple[ProblemConfig, OptimizationTrace]:
    d = json.loads(Path(path).read_text())
    return ProblemConfig.from_dict(d["config"]), OptimizationTrace.from_dict(d["trace"])
