"""Acquisition functions for maximization.

Every scoring function accepts a :class:`GPPosterior` whose fields may be
scalars or arrays, and broadcasts accordingly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import log_ndtr, ndtr

from .core import ConfigurationError, DesignPoint
from .surrogates import FittedGP, GPPosterior, probability_of_feasibility_post

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class BetaSchedule:
    """UCB exploration weight ``2 log(d pi^2 t^2 / (6 delta))``."""

    delta: float = 0.1
    input_dimension: int = 2

    def __post_init__(self):
        if not (0.0 < self.delta <= 1.0):
            raise ConfigurationError("delta must lie in (0, 1]")
        if self.input_dimension < 1:
            raise ConfigurationError("input_dimension must be positive")

    def beta(self, t: int) -> float:
        if t < 1:
            raise ConfigurationError("iteration index starts at 1")
        return 2.0 * math.log(self.input_dimension * math.pi**2 * t**2 / (6.0 * self.delta))


@dataclass(frozen=True)
class MaxValueSamples:
    samples: tuple[float, ...]

    @property
    def count(self) -> int:
        return len(self.samples)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.samples, dtype=float)


def _norm_pdf(z):
    # z*z overflows to inf for huge |z|; exp(-inf) = 0 is still right
    with np.errstate(over="ignore"):
        return np.exp(-0.5 * z * z) / _SQRT_2PI


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def ucb(post: GPPosterior, beta: float):
    if beta < 0:
        raise ConfigurationError("beta must be non-negative")
    return _scalar(np.asarray(post.mean) + math.sqrt(beta) * np.sqrt(np.asarray(post.variance)))


def expected_improvement(post: GPPosterior, incumbent: float):
    mu = np.asarray(post.mean, dtype=float)
    sd = np.sqrt(np.maximum(np.asarray(post.variance, dtype=float), 0.0))
    gap = mu - incumbent
    with np.errstate(divide="ignore", invalid="ignore"):
        z = gap / sd
        ei = gap * ndtr(z) + sd * _norm_pdf(z)
    ei = np.where(sd > 0, np.maximum(ei, 0.0), np.maximum(gap, 0.0))
    return _scalar(ei)


def probability_of_improvement(post: GPPosterior, incumbent: float):
    return probability_of_feasibility_post(post, incumbent)


def feasibility_weight(posts_constraints: Sequence[GPPosterior], thresholds=0.0):
    """Joint probability that every constraint posterior clears its threshold."""
    if np.ndim(thresholds) == 0:
        thresholds = [thresholds] * len(posts_constraints)
    w = 1.0
    for post, thr in zip(posts_constraints, thresholds):
        w = w * np.asarray(probability_of_feasibility_post(post, thr))
    return w


def constrained_ei(
    post_objective: GPPosterior,
    posts_constraints: Sequence[GPPosterior],
    incumbent: float | None,
    thresholds=0.0,
):
    """EI times the joint probability of feasibility.

    ``incumbent=None`` means nothing feasible has been observed yet, in which
    case the score is the feasibility probability alone.
    """
    w = feasibility_weight(posts_constraints, thresholds)
    if incumbent is None:
        return _scalar(w * np.ones_like(np.asarray(post_objective.mean, dtype=float)))
    return _scalar(expected_improvement(post_objective, incumbent) * w)


def _log_max_cdf(z: float, mu: np.ndarray, sd: np.ndarray) -> float:
    # log P(max_i f_i <= z) under independent marginals
    known = sd == 0
    if np.any(mu[known] > z):
        return -np.inf
    s = sd[~known]
    return float(np.sum(log_ndtr((z - mu[~known]) / s))) if s.size else 0.0


def _max_quantile(r: float, mu: np.ndarray, sd: np.ndarray) -> float:
    target = math.log(r)
    lo = float(np.max(mu))
    hi = float(np.max(mu + 10.0 * sd)) + 1.0
    if _log_max_cdf(lo, mu, sd) >= target:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _log_max_cdf(mid, mu, sd) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)


def gumbel_max_samples(mean, variance, count: int, rng: np.random.Generator) -> MaxValueSamples:
    """Sample the maximum of independent Gaussians from a quartile-matched Gumbel."""
    mu = np.asarray(mean, dtype=float).ravel()
    sd = np.sqrt(np.maximum(np.asarray(variance, dtype=float).ravel(), 0.0))
    if mu.size == 0:
        raise ConfigurationError("candidate grid must be non-empty")
    if count < 1:
        raise ConfigurationError("count must be at least 1")
    u = rng.uniform(size=count)
    if np.all(sd == 0):
        return MaxValueSamples(tuple(float(np.max(mu)) for _ in range(count)))
    q25, q50, q75 = (_max_quantile(r, mu, sd) for r in (0.25, 0.5, 0.75))
    b = (q75 - q25) / (math.log(-math.log(0.25)) - math.log(-math.log(0.75)))
    a = q50 + b * math.log(-math.log(0.5))
    draws = a - b * np.log(-np.log(u))
    floor = np.max(mu[sd == 0]) if np.any(sd == 0) else -np.inf
    draws = np.maximum(draws, floor)
    return MaxValueSamples(tuple(float(v) for v in draws))


def sample_max_values(
    gp: FittedGP, candidate_grid: Sequence[DesignPoint], count: int = 10, rng: np.random.Generator | None = None
) -> MaxValueSamples:
    if rng is None:
        rng = np.random.default_rng(0)
    if len(candidate_grid) == 0:
        raise ConfigurationError("candidate grid must be non-empty")
    post = gp.predict_many(candidate_grid)
    return gumbel_max_samples(post.mean, post.variance, count, rng)


def mes_score(post: GPPosterior, maxima: MaxValueSamples):
    """Max-value entropy search: mean over y* of g*pdf(g)/(2 cdf(g)) - log cdf(g)."""
    mu = np.asarray(post.mean, dtype=float)[..., None]
    sd = np.sqrt(np.maximum(np.asarray(post.variance, dtype=float), 0.0))[..., None]
    ys = maxima.as_array()
    with np.errstate(divide="ignore", invalid="ignore"):
        g = (ys - mu) / sd
        log_cdf = log_ndtr(g)
        ratio = np.exp(-0.5 * g * g - log_cdf) / _SQRT_2PI
        term = 0.5 * g * ratio - log_cdf
    term = np.where(sd > 0, np.maximum(term, 0.0), 0.0)
    return _scalar(term.mean(axis=-1))


def cmes_score(
    post_objective: GPPosterior,
    posts_constraints: Sequence[GPPosterior],
    maxima: MaxValueSamples,
    thresholds=0.0,
):
    """Objective MES weighted by the joint probability of feasibility."""
    return _scalar(mes_score(post_objective, maxima) * feasibility_weight(posts_constraints, thresholds))


def mace_score(
    post_objective: GPPosterior,
    posts_constraints: Sequence[GPPosterior],
    beta: float,
    incumbent: float | None,
    thresholds=0.0,
):
    """Feasibility-weighted ``(UCB, EI, PI)``; the last axis indexes the triple."""
    w = feasibility_weight(posts_constraints, thresholds)
    if incumbent is None:
        # no feasible incumbent: improvement terms are measured against -inf
        ei = np.ones_like(np.asarray(post_objective.mean, dtype=float))
        pi = ei
    else:
        ei = np.asarray(expected_improvement(post_objective, incumbent))
        pi = np.asarray(probability_of_improvement(post_objective, incumbent))
    u = np.asarray(ucb(post_objective, beta))
    return np.stack(np.broadcast_arrays(u * w, ei * w, pi * w), axis=-1)
