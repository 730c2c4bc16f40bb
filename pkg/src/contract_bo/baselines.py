"""Comparison strategies sharing the prior sets and round structure of cPMES."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from . import acquisition as acq
from .core import DesignPoint, Evaluator
from .cpmes import (
    PHI_THRESHOLD,
    MOObjectives,
    OptimizationTrace,
    ProblemConfig,
    RoundContext,
    _variance_fallback,
    bo_loop,
    cmes_scores,
)
from .pareto import nsga2

log = logging.getLogger(__name__)


def _argmax(cand: list[DesignPoint], scores, k: int = 1) -> list[DesignPoint]:
    scores = np.asarray(scores, dtype=float)
    order = sorted(range(len(cand)), key=lambda i: (-scores[i], cand[i]))
    return [cand[i] for i in order[:k]]


def _unevaluated(ctx: RoundContext) -> list[DesignPoint]:
    ev = ctx.evaluated
    return [d for d in ctx.lattice if d not in ev]


def _incumbent(ctx: RoundContext) -> float | None:
    return ctx.trace.best_feasible()


def propose_cei(ctx: RoundContext):
    cand = _unevaluated(ctx)
    if not cand:
        return [], False
    sur = ctx.surrogates()
    obj = sur.objective.predict_many(cand)
    cons, thr = sur.constraint_posteriors(cand)
    pof = np.atleast_1d(acq.feasibility_weight(cons, thr))
    incumbent = _incumbent(ctx)
    if incumbent is None:
        log.info("cEI: no feasible incumbent, maximizing feasibility probability")
        return _argmax(cand, pof, ctx.k), True
    scores = np.atleast_1d(acq.constrained_ei(obj, cons, incumbent, thr))
    if not np.any(scores > 0):
        log.info("cEI: all scores zero, maximizing feasibility probability")
        return _argmax(cand, pof, ctx.k), True
    return _argmax(cand, scores, ctx.k), False


def propose_cmes(ctx: RoundContext):
    cand = _unevaluated(ctx)
    if not cand:
        return [], False
    sur = ctx.surrogates()
    maxima = acq.sample_max_values(sur.objective, ctx.grid(), ctx.config.max_value_samples, ctx.rng)
    return _argmax(cand, cmes_scores(sur, cand, maxima), ctx.k), False


class _MaceObjectives(MOObjectives):
    def __init__(self, surrogates, beta, incumbent):
        super().__init__(surrogates, beta)
        self.incumbent = incumbent

    def table(self, points):
        obj, ir, phi = self.surrogates.posteriors(points)
        thr = [PHI_THRESHOLD] + [0.0] * len(ir)
        return np.atleast_2d(acq.mace_score(obj, [phi] + ir, self.beta, self.incumbent, thr))


def propose_mace(ctx: RoundContext):
    sur = ctx.surrogates()
    beta = acq.BetaSchedule(ctx.config.delta, 2).beta(ctx.round_index)
    mo = _MaceObjectives(sur, beta, _incumbent(ctx))
    mo.prefill(ctx.lattice)
    front = nsga2(mo, ctx.nsga_config(int(ctx.rng.integers(2**31))))
    cand = [d for d in front.designs if d not in ctx.evaluated]
    if not cand:
        return _variance_fallback(sur, ctx.lattice, ctx.evaluated, ctx.k), True
    return uniform_pick(cand, ctx.k, ctx.rng), False


def uniform_pick(cand: list[DesignPoint], k: int, rng: np.random.Generator) -> list[DesignPoint]:
    """``k`` distinct members drawn uniformly without replacement (all of them if fewer)."""
    if len(cand) <= k:
        return list(cand)
    idx = rng.choice(len(cand), size=k, replace=False)
    return [cand[i] for i in idx]


def propose_random(ctx: RoundContext):
    cand = _unevaluated(ctx)
    return uniform_pick(cand, ctx.k, ctx.rng), False


def run_cei(config: ProblemConfig, evaluator: Evaluator, trace=None, snapshot: Path | None = None) -> OptimizationTrace:
    return bo_loop(config, evaluator, propose_cei, "cei", trace, snapshot)


def run_cmes(config: ProblemConfig, evaluator: Evaluator, trace=None, snapshot: Path | None = None) -> OptimizationTrace:
    return bo_loop(config, evaluator, propose_cmes, "cmes", trace, snapshot)


def run_mace(
    config: ProblemConfig, evaluator: Evaluator, batch_size: int | None = None, trace=None, snapshot: Path | None = None
) -> OptimizationTrace:
    if batch_size is not None and batch_size != config.batch_size:
        from dataclasses import replace

        config = replace(config, batch_size=batch_size)
    return bo_loop(config, evaluator, propose_mace, "mace", trace, snapshot)


def run_random(config: ProblemConfig, evaluator: Evaluator, trace=None, snapshot: Path | None = None) -> OptimizationTrace:
    return bo_loop(config, evaluator, propose_random, "random", trace, snapshot)
