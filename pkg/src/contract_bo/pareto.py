"""NSGA-II over the mixed (continuous tax, integer recruitment) design space.

All objectives are maximized.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import ConfigurationError, DesignPoint, snap_alpha


class EvaluationError(RuntimeError):
    """An objective function returned a non-finite value."""


@dataclass(frozen=True)
class ScoredDesign:
    design: DesignPoint
    objectives: tuple[float, ...]

    def __post_init__(self):
        obj = tuple(float(v) for v in self.objectives)
        if not all(np.isfinite(obj)):
            raise EvaluationError(f"non-finite objectives {obj} at {self.design}")
        object.__setattr__(self, "objectives", obj)


@dataclass(frozen=True)
class ParetoFront:
    members: tuple[ScoredDesign, ...]

    @property
    def designs(self) -> list[DesignPoint]:
        return [m.design for m in self.members]

    def objective_matrix(self) -> np.ndarray:
        return np.array([m.objectives for m in self.members], dtype=float)

    def __len__(self):
        return len(self.members)

    def to_csv(self, path, iteration: int | None = None):
        with open(path, "a" if iteration else "w", newline="") as fh:
            w = csv.writer(fh)
            if not iteration:
                w.writerow(["iteration", "alpha", "n_added"] + [f"obj{i}" for i in range(self._n_obj())])
            for m in self.members:
                w.writerow([iteration or 0, repr(m.design.alpha), m.design.n_added] + [repr(v) for v in m.objectives])

    def _n_obj(self):
        return len(self.members[0].objectives) if self.members else 0


def _as_matrix(population) -> np.ndarray:
    if isinstance(population, np.ndarray):
        return np.atleast_2d(population.astype(float))
    return np.array([p.objectives for p in population], dtype=float)


def dominance_matrix(F: np.ndarray) -> np.ndarray:
    """``D[i, j]`` is True when row i dominates row j."""
    ge = np.all(F[:, None, :] >= F[None, :, :], axis=-1)
    gt = np.any(F[:, None, :] > F[None, :, :], axis=-1)
    return ge & gt


def non_dominated_sort(population) -> list[list[int]]:
    """Fast non-dominated sort; returns fronts of indices, best first."""
    F = _as_matrix(population)
    n = len(F)
    if n == 0:
        return []
    D = dominance_matrix(F)
    dominated_by = D.sum(axis=0)
    fronts = []
    current = np.flatnonzero(dominated_by == 0)
    while current.size:
        fronts.append(current.tolist())
        dominated_by = dominated_by - D[current].sum(axis=0)
        dominated_by[current] = -1
        current = np.flatnonzero(dominated_by == 0)
    return fronts


def crowding_distance(front) -> np.ndarray:
    """Crowding distance, computed on distinct values so it is permutation invariant.

    Every point attaining the extreme of an objective gets ``inf``; interior
    points add the gap between the neighbouring distinct values, normalized by
    the objective range. Objectives that are constant over the front are
    skipped.
    """
    F = _as_matrix(front)
    n = len(F)
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for m in range(F.shape[1]):
        col = F[:, m]
        lo, hi = col.min(), col.max()
        if hi == lo:
            continue
        vals = np.unique(col)
        pos = np.searchsorted(vals, col)
        boundary = (col == lo) | (col == hi)
        prev = vals[np.maximum(pos - 1, 0)]
        nxt = vals[np.minimum(pos + 1, len(vals) - 1)]
        dist += np.where(boundary, 0.0, (nxt - prev) / (hi - lo))
        dist[boundary] = np.inf
    return dist


def pareto_mask(F: np.ndarray) -> np.ndarray:
    F = _as_matrix(F)
    if len(F) == 0:
        return np.zeros(0, dtype=bool)
    return ~dominance_matrix(F).any(axis=0)


@dataclass(frozen=True)
class NSGA2Config:
    population_size: int = 100
    generations: int = 50
    crossover_rate: float = 0.9
    sbx_eta: float = 15.0
    alpha_mutation_rate: float = 0.2
    alpha_sigma: float = 0.1
    n_mutation_rate: float = 0.2
    seed: int = 0
    max_added: int = 3
    alpha_grid_size: int | None = 101  # None: continuous alpha
    exhaustive: bool = False
    repair: Callable[[DesignPoint], DesignPoint] | None = None  # maps infeasible encodings back into the space

    def __post_init__(self):
        if self.population_size < 2 or self.population_size % 2:
            raise ConfigurationError("population_size must be an even number >= 2")
        if self.generations < 0:
            raise ConfigurationError("generations must be non-negative")


def _rank_and_crowding(F: np.ndarray):
    rank = np.empty(len(F), dtype=int)
    crowd = np.empty(len(F))
    fronts = non_dominated_sort(F)
    for r, idx in enumerate(fronts):
        rank[idx] = r
        crowd[idx] = crowding_distance(F[idx])
    return rank, crowd, fronts


def _sbx(a: float, b: float, eta: float, rng: np.random.Generator) -> tuple[float, float]:
    u = rng.uniform()
    if u <= 0.5:
        beta = (2 * u) ** (1.0 / (eta + 1))
    else:
        beta = (1.0 / (2 * (1 - u))) ** (1.0 / (eta + 1))
    c1 = 0.5 * ((1 + beta) * a + (1 - beta) * b)
    c2 = 0.5 * ((1 - beta) * a + (1 + beta) * b)
    return c1, c2


class _CachedObjective:
    def __init__(self, evaluate):
        self.evaluate = evaluate
        self.cache: dict[DesignPoint, tuple[float, ...]] = {}

    def __call__(self, d: DesignPoint) -> tuple[float, ...]:
        if d not in self.cache:
            val = tuple(float(v) for v in np.atleast_1d(self.evaluate(d)))
            if not all(np.isfinite(val)):
                raise EvaluationError(f"non-finite objectives {val} at {d}")
            self.cache[d] = val
        return self.cache[d]

    def front(self) -> ParetoFront:
        designs = sorted(self.cache)
        F = np.array([self.cache[d] for d in designs])
        keep = pareto_mask(F)
        return ParetoFront(tuple(ScoredDesign(d, self.cache[d]) for d, k in zip(designs, keep) if k))


def exhaustive_front(evaluate: Callable[[DesignPoint], Sequence[float]], lattice: Sequence[DesignPoint]) -> ParetoFront:
    obj = _CachedObjective(evaluate)
    for d in lattice:
        obj(d)
    return obj.front()


def nsga2(evaluate: Callable[[DesignPoint], Sequence[float]], config: NSGA2Config) -> ParetoFront:
    """Run NSGA-II and return the non-dominated set of every design it evaluated.

    ``evaluate`` must be deterministic for the duration of the call; results
    are memoized per design. The returned members are unique and sorted by
    ``(alpha, n_added)``.
    """
    obj = _CachedObjective(evaluate)
    rng = np.random.default_rng(config.seed)
    grid = config.alpha_grid_size
    if config.exhaustive:
        if grid is None:
            raise ConfigurationError("exhaustive mode needs a discrete alpha grid")
        from .core import design_lattice

        lattice = design_lattice(grid, config.max_added)
        if config.repair is not None:
            lattice = sorted({config.repair(d) for d in lattice})
        return exhaustive_front(evaluate, lattice)

    fix = config.repair or (lambda d: d)

    def sample_alpha(size):
        if grid is None:
            return rng.uniform(0.0, 1.0, size)
        return rng.integers(0, grid, size) / (grid - 1)

    def sample(size):
        return [
            fix(DesignPoint(snap_alpha(a, grid), int(n)))
            for a, n in zip(sample_alpha(size), rng.integers(0, config.max_added + 1, size))
        ]

    N = config.population_size
    pop = sample(N)
    F = np.array([obj(d) for d in pop])
    rank, crowd, _ = _rank_and_crowding(F)

    for _ in range(config.generations):
        # binary tournament on (rank, -crowding)
        i, j = rng.integers(0, N, (2, N))
        better = (rank[i] < rank[j]) | ((rank[i] == rank[j]) & (crowd[i] > crowd[j]))
        parents = np.where(better, i, j)
        children = []
        for k in range(0, N, 2):
            p1, p2 = pop[parents[k]], pop[parents[k + 1]]
            a1, a2, n1, n2 = p1.alpha, p2.alpha, p1.n_added, p2.n_added
            if rng.uniform() < config.crossover_rate:
                a1, a2 = _sbx(a1, a2, config.sbx_eta, rng)
                if rng.uniform() < 0.5:
                    n1, n2 = n2, n1
            kids = []
            for a, n in ((a1, n1), (a2, n2)):
                if rng.uniform() < config.alpha_mutation_rate:
                    a = a + rng.normal(0.0, config.alpha_sigma)
                if rng.uniform() < config.n_mutation_rate:
                    n = int(rng.integers(0, config.max_added + 1))
                kids.append(fix(DesignPoint(snap_alpha(a, grid), n)))
            children.extend(kids)
        # duplicates crowd out the front on a discrete grid; drop them and top up
        merged = list(dict.fromkeys(pop + children))
        for _ in range(3):
            if len(merged) >= N:
                break
            merged = list(dict.fromkeys(merged + sample(N - len(merged))))
        merged += pop[: max(0, N - len(merged))]
        MF = np.array([obj(d) for d in merged])
        m_rank, m_crowd, fronts = _rank_and_crowding(MF)
        chosen: list[int] = []
        for idx in fronts:
            if len(chosen) + len(idx) <= N:
                chosen.extend(idx)
            else:
                order = sorted(idx, key=lambda q: (-m_crowd[q], q))
                chosen.extend(order[: N - len(chosen)])
                break
        pop = [merged[q] for q in chosen]
        F = MF[chosen]
        rank, crowd, _ = _rank_and_crowding(F)

    return obj.front()
