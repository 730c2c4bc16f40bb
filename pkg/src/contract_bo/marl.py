"""Tabular multi-type mean-field Q-learning on the Clean-up environment.

Each agent type owns one Q-table indexed by ``(feature key, harvester mean
action, cleaner mean action, own action)``. Mean actions are the previous
step's empirical action distribution of each type, grouped into
(move, stay, interact) and snapped to a simplex grid.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np

from . import _kernels
from .cleanup import CLEANER, HARVESTER, N_ACTIONS, CleanupConfig, CleanupEnv, ContractRewardWiring
from .core import ConfigurationError, DesignPoint, EvaluationRecord

log = logging.getLogger(__name__)

TYPE_NAMES = ("harvester", "cleaner")
ACTION_GROUPS = (0, 0, 0, 0, 1, 2)  # up/down/left/right -> move, stay, interact
N_HARVESTERS = 5


class DivergenceError(RuntimeError):
    """A Q-value left the configured bound during training."""


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class TypeRoster:
    counts: tuple[int, ...]
    types: tuple[str, ...] = TYPE_NAMES

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if len(self.counts) != len(self.types) or len(self.types) != 2:
            raise ConfigurationError("the roster has exactly two types")
        if min(self.counts) < 0:
            raise ConfigurationError("type counts must be non-negative")

    @property
    def agent_types(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.counts)), self.counts)


@dataclass(frozen=True)
class MeanActionGrid:
    """Simplex grid over action groups with resolution ``1 / divisions``."""

    group_of_action: tuple[int, ...] = ACTION_GROUPS
    divisions: int = 2
    empty_group: int = 1  # grid point used when a type has no agents

    def __post_init__(self):
        if self.divisions < 1:
            raise ConfigurationError("divisions must be positive")

    @property
    def n_groups(self) -> int:
        return max(self.group_of_action) + 1

    @property
    def points(self) -> np.ndarray:
        return _simplex_points(self.n_groups, self.divisions)

    @property
    def size(self) -> int:
        return len(self.points)

    def distribution(self, actions: np.ndarray) -> np.ndarray:
        g = np.asarray(self.group_of_action)[np.asarray(actions, dtype=int)]
        return np.bincount(g, minlength=self.n_groups) / max(len(g), 1)

    def index(self, actions: np.ndarray) -> int:
        """Grid index of the empirical distribution of ``actions`` (largest remainder rounding)."""
        m = self.divisions
        if len(actions) == 0:
            counts = np.zeros(self.n_groups, dtype=int)
            counts[self.empty_group] = m
        else:
            counts = _round_to_grid(self.distribution(actions), m)
        return _point_index(self.n_groups, m)[tuple(counts)]

    def probabilities(self, index: int) -> np.ndarray:
        return self.points[index] / self.divisions


_POINTS_CACHE: dict = {}


def _simplex_points(k: int, m: int) -> np.ndarray:
    key = (k, m)
    if key not in _POINTS_CACHE:
        pts = [c for c in itertools.product(range(m + 1), repeat=k) if sum(c) == m]
        _POINTS_CACHE[key] = np.array(sorted(pts, reverse=True), dtype=int)
    return _POINTS_CACHE[key]


_INDEX_CACHE: dict = {}


def _point_index(k: int, m: int) -> dict:
    key = (k, m)
    if key not in _INDEX_CACHE:
        _INDEX_CACHE[key] = {tuple(p): i for i, p in enumerate(_simplex_points(k, m))}
    return _INDEX_CACHE[key]


def _round_to_grid(p: np.ndarray, m: int) -> np.ndarray:
    scaled = p * m
    base = np.floor(scaled + 1e-12).astype(int)
    rem = scaled - base
    short = m - base.sum()
    # ties on the remainder go to the lower group index
    order = sorted(range(len(p)), key=lambda i: (-rem[i], i))
    for i in order[:short]:
        base[i] += 1
    return base


# ---------------------------------------------------------------- features

DIR_CODES = 14  # none, here, 4 directions x 3 distance buckets
N_COUNT_CODES = _kernels.N_COUNT  # joint apple/waste bucket code, see _kernels.APPLE_EDGES
AGENT_BUCKETS = 3  # 0 | 1 | 2+
WALL_CODES = 4  # wall visible on the left / right
N_KEYS = DIR_CODES * N_COUNT_CODES * AGENT_BUCKETS**2 * WALL_CODES
EMPTY_KEY = 0


@dataclass(frozen=True)
class AgentObservation:
    window: np.ndarray  # (5, 2r+1, 2r+1): apples, waste, harvesters, cleaners, wall
    agent_type: int

    def __post_init__(self):
        w = np.asarray(self.window)
        if w.ndim != 3 or w.shape[0] != 5 or w.shape[1] != w.shape[2] or w.shape[1] % 2 == 0:
            raise ConfigurationError("window must have shape (5, 2r+1, 2r+1)")


_GEOM_CACHE: dict = {}


def _geometry(width: int):
    if width not in _GEOM_CACHE:
        r = width // 2
        dr, dc = np.mgrid[-r:r + 1, -r:r + 1]
        dist = np.abs(dr) + np.abs(dc)
        rank = (dist * width * width + np.arange(width * width).reshape(width, width)).ravel()
        vertical = np.abs(dr) >= np.abs(dc)
        direction = np.where(vertical, np.where(dr < 0, 0, 1), np.where(dc < 0, 2, 3)).ravel()
        bucket = np.minimum(dist, 3).ravel() - 1
        code = np.where(dist.ravel() == 0, 1, 2 + direction * 3 + np.maximum(bucket, 0))
        _GEOM_CACHE[width] = (rank, code)
    return _GEOM_CACHE[width]


def _bucket(counts: np.ndarray, edges: np.ndarray) -> np.ndarray:
    return np.searchsorted(edges, counts, side="right") - 1


def _count_code(apples: np.ndarray, waste: np.ndarray, agent_types: np.ndarray) -> np.ndarray:
    t = np.where(agent_types == HARVESTER, 0, 1)
    out = np.empty(len(t), dtype=np.int64)
    for ty in (0, 1):
        m = t == ty
        a_edges, w_edges = _kernels.APPLE_EDGES[ty], _kernels.WASTE_EDGES[ty]
        out[m] = _bucket(apples[m], a_edges) * len(w_edges) + _bucket(waste[m], w_edges)
    return out


def featurize_batch(windows: np.ndarray, agent_types: np.ndarray) -> np.ndarray:
    """Vectorized :func:`featurize` over ``windows`` of shape (n, 5, w, w)."""
    n, _, w, _ = windows.shape
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    rank, code = _geometry(w)
    flat = windows.reshape(n, 5, w * w)
    target = flat[np.arange(n), np.where(agent_types == HARVESTER, 0, 1)] > 0
    big = w * w * w * w * 4
    score = np.where(target, rank[None, :], big)
    nearest = score.argmin(axis=1)
    dir_code = np.where(target.any(axis=1), code[nearest], 0)
    counts = _count_code(flat[:, 0].sum(axis=1), flat[:, 1].sum(axis=1), agent_types)
    n_h = np.minimum(flat[:, 2].sum(axis=1), AGENT_BUCKETS - 1)
    n_c = np.minimum(flat[:, 3].sum(axis=1), AGENT_BUCKETS - 1)
    r = w // 2
    wall = windows[:, 4, r, :]
    wall_code = 2 * (wall[:, 0] > 0) + (wall[:, -1] > 0)
    key = dir_code
    for value, size in ((counts, N_COUNT_CODES), (n_h, AGENT_BUCKETS), (n_c, AGENT_BUCKETS), (wall_code, WALL_CODES)):
        key = key * size + value
    return key.astype(np.int64)


def featurize(obs: AgentObservation) -> int:
    """Compact integer key in ``[0, N_KEYS)``; an empty window maps to ``EMPTY_KEY``."""
    win = np.asarray(obs.window)[None]
    return int(featurize_batch(win, np.array([obs.agent_type]))[0])


# ---------------------------------------------------------------- learning


@dataclass
class QTable:
    """Dense per-type tables; unseen entries read as 0."""

    tables: list[np.ndarray]

    @classmethod
    def zeros(cls, n_types: int, n_keys: int, n_mean: int, n_actions: int) -> "QTable":
        return cls([np.zeros((n_keys,) + (n_mean,) * n_types + (n_actions,)) for _ in range(n_types)])

    def values(self, agent_type: int, keys, mean_index: Sequence[int]) -> np.ndarray:
        return self.tables[agent_type][(np.asarray(keys),) + tuple(mean_index)]

    def max_abs(self) -> float:
        return max(float(np.abs(t).max()) for t in self.tables)

    def to_dict(self) -> dict:
        """Sparse form: only non-zero entries."""
        out = []
        for t in self.tables:
            idx = np.argwhere(t != 0)
            out.append({"shape": list(t.shape), "index": idx.tolist(), "value": [float(v) for v in t[tuple(idx.T)]]})
        return {"tables": out}

    @classmethod
    def from_dict(cls, d: dict) -> "QTable":
        tables = []
        for entry in d["tables"]:
            t = np.zeros(entry["shape"])
            if entry["index"]:
                t[tuple(np.array(entry["index"]).T)] = entry["value"]
            tables.append(t)
        return cls(tables)


@dataclass(frozen=True)
class Transition:
    """A batch of same-type transitions sharing mean-action context."""

    agent_type: int
    keys: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_keys: np.ndarray
    done: bool


def mtmfq_update(
    q: QTable,
    transition: Transition,
    mean_actions: tuple[Sequence[int], Sequence[int]],
    learning_rate: float,
    gamma: float,
) -> QTable:
    """In-place mean-field TD update; returns ``q``.

    ``mean_actions`` holds the grid indices conditioning the current
    entries and the bootstrap target, in that order. Transitions in the batch
    are applied one after another, so a repeated entry sees its own update.
    """
    if not 0.0 <= learning_rate <= 1.0:
        raise ConfigurationError("learning_rate must lie in [0, 1]")
    if not 0.0 < gamma < 1.0:
        raise ConfigurationError("gamma must lie in (0, 1)")
    tr = transition
    if len(tr.keys) == 0 or learning_rate == 0.0:
        return q
    table = q.tables[tr.agent_type]
    prev, nxt = (tuple(int(i) for i in m) for m in mean_actions)
    rewards = np.asarray(tr.rewards, dtype=float)
    if tr.done:
        target = rewards
    else:
        target = rewards + gamma * table[(np.asarray(tr.next_keys),) + nxt].max(axis=-1)
    for k, a, y in zip(np.asarray(tr.keys), np.asarray(tr.actions), target):
        idx = (int(k),) + prev + (int(a),)
        table[idx] += learning_rate * (y - table[idx])
    return q


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 5000
    eval_episodes: int = 50
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.6
    learning_rate: float = 0.1
    mean_action_divisions: int = 2
    q_bound: float | None = None  # default: R_max / (1 - gamma) + 1
    moving_average: int = 100
    convergence_tolerance: float = 0.05
    n_harvesters: int = N_HARVESTERS

    def __post_init__(self):
        if self.episodes < 1 or self.eval_episodes < 1:
            raise ConfigurationError("episodes and eval_episodes must be positive")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ConfigurationError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if not 0.0 < self.epsilon_decay_fraction <= 1.0:
            raise ConfigurationError("epsilon_decay_fraction must lie in (0, 1]")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigurationError("learning_rate must lie in (0, 1]")

    def epsilon(self, episode: int) -> float:
        horizon = self.epsilon_decay_fraction * self.episodes
        frac = min(1.0, episode / horizon) if horizon > 0 else 1.0
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        if set(d) - names:
            raise ConfigurationError(f"unknown training keys {sorted(set(d) - names)}")
        return cls(**d)


@dataclass
class TrainReport:
    design: DesignPoint
    seed: int
    episodes: int
    collective_rewards: list[float]
    welfare: float  # mean greedy-evaluation welfare per episode
    welfare_per_episode: list[float]
    harvester_returns: list[float]
    cleaner_returns: list[float]
    apples_timeline: list[float]  # median apples present after each step, over evaluation episodes
    waste_timeline: list[float]
    converged: bool
    max_abs_q: float
    q_table: QTable | None = field(default=None, repr=False)

    def apples_at(self, timestep: int) -> float:
        return self.apples_timeline[timestep - 1]

    def moving_average(self, window: int = 100) -> np.ndarray:
        x = np.asarray(self.collective_rewards)
        c = np.cumsum(np.insert(x, 0, 0.0))
        out = np.empty(len(x))
        for i in range(len(x)):
            lo = max(0, i + 1 - window)
            out[i] = (c[i + 1] - c[lo]) / (i + 1 - lo)
        return out

    def curve_to_csv(self, path, window: int = 100) -> None:
        ma = self.moving_average(window)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["episode", "collective_reward", f"moving_average_{window}"])
            for i, (r, m) in enumerate(zip(self.collective_rewards, ma)):
                w.writerow([i, repr(float(r)), repr(float(m))])

    def to_dict(self, include_q: bool = False) -> dict:
        d = {k: getattr(self, k) for k in (
            "seed", "episodes", "collective_rewards", "welfare", "welfare_per_episode", "harvester_returns",
            "cleaner_returns", "apples_timeline", "waste_timeline", "converged", "max_abs_q")}
        d["design"] = {"alpha": self.design.alpha, "n_added": self.design.n_added}
        if include_q and self.q_table is not None:
            d["q_table"] = self.q_table.to_dict()
        return d

    def to_json(self, include_q: bool = False) -> str:
        return json.dumps(self.to_dict(include_q))

    @classmethod
    def from_dict(cls, d: dict) -> "TrainReport":
        d = dict(d)
        des = d.pop("design")
        q = d.pop("q_table", None)
        return cls(design=DesignPoint(des["alpha"], des["n_added"]), q_table=QTable.from_dict(q) if q else None, **d)

    @classmethod
    def from_json(cls, text: str) -> "TrainReport":
        return cls.from_dict(json.loads(text))


def default_q_bound(env_config: CleanupConfig, n_harvesters: int) -> float:
    r_max = env_config.harvest_reward * max(n_harvesters, 1) + env_config.cost_harvester + env_config.cost_cleaner
    return r_max / (1.0 - env_config.gamma) + 1.0


class _Runner:
    """Drives compiled episodes; all random draws come from numpy generators here."""

    def __init__(self, design: DesignPoint, env_config: CleanupConfig, train_config: TrainConfig, q: QTable | None = None):
        self.cfg = env_config
        self.tc = train_config
        self.design = design
        self.roster = TypeRoster((train_config.n_harvesters, design.n_added))
        self.types = self.roster.agent_types
        ContractRewardWiring(design.alpha, design.n_added)
        self.grid = MeanActionGrid(divisions=train_config.mean_action_divisions)
        self.q = q or QTable.zeros(2, N_KEYS, self.grid.size, N_ACTIONS)
        self.env = CleanupEnv(env_config)
        self.bound = train_config.q_bound or default_q_bound(env_config, train_config.n_harvesters)
        g = self.grid
        m = g.divisions
        lookup = np.full((m + 1) ** g.n_groups, -1, dtype=np.int64)
        for i, p in enumerate(g.points):
            code = 0
            for c in p:
                code = code * (m + 1) + int(c)
            lookup[code] = i
        self._grid_args = (np.asarray(g.group_of_action, dtype=np.int64), g.n_groups, m, g.empty_group, lookup)

    def episode(self, env_seed, epsilon: float, rng: np.random.Generator, learn: bool):
        cfg, n = self.cfg, len(self.types)
        state = self.env.reset(*self.roster.counts, env_seed)
        T = cfg.episode_length
        spawn_u = self.env.rng.random((T, 2, cfg.height, cfg.width))
        prio_u = self.env.rng.random((T, n))
        explore_u = rng.random((T, n))
        random_a = rng.integers(0, N_ACTIONS, (T, n))
        noise = rng.random((T, n, N_ACTIONS)) * 1e-9  # random tie-break among equal Q-values
        params = np.array([
            cfg.waste_spawn_prob, cfg.apple_spawn_base_prob, cfg.pollution_threshold, self.design.alpha,
            cfg.harvest_reward, cfg.cost_harvester, cfg.cost_cleaner, epsilon, cfg.view_radius,
        ])
        returns = np.zeros(n)
        apples_t = np.zeros(T)
        waste_t = np.zeros(T)
        collective, welfare = _kernels.run_episode(
            self.q.tables[HARVESTER], self.q.tables[CLEANER], state.positions, state.orientations, state.agent_types,
            state.apples, state.waste, self.env.river, self.env.harvest, params, spawn_u, prio_u, explore_u,
            random_a, noise, learn, self.tc.learning_rate, cfg.gamma, *self._grid_args, returns, apples_t, waste_t,
        )
        state.timestep = T
        return collective, welfare, returns, apples_t, waste_t


def _episode_seeds(seed: int, stream: int, count: int) -> list[int]:
    ss = np.random.SeedSequence([seed, stream])
    return [int(s) for s in ss.generate_state(count, dtype=np.uint32)]


def train(
    design: DesignPoint,
    env_config: CleanupConfig | None = None,
    train_config: TrainConfig | None = None,
    seed: int = 0,
    keep_q: bool = False,
) -> TrainReport:
    """Train MTMFQ policies for ``design`` and evaluate them greedily.

    Raises :class:`DivergenceError` when any Q-value exceeds the bound.
    """
    env_config = env_config or CleanupConfig()
    tc = train_config or TrainConfig()
    runner = _Runner(design, env_config, tc)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    env_seeds = _episode_seeds(seed, 2, tc.episodes)
    curve = []
    for ep in range(tc.episodes):
        collective, *_ = runner.episode(env_seeds[ep], tc.epsilon(ep), rng, learn=True)
        curve.append(float(collective))
        if ep % 100 == 99 or ep == tc.episodes - 1:
            qmax = runner.q.max_abs()
            if not np.isfinite(qmax) or qmax > runner.bound:
                raise DivergenceError(f"|Q| reached {qmax:.3g} > bound {runner.bound:.3g} at episode {ep} for {design}")
    eval_rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    eval_seeds = _episode_seeds(seed, 4, tc.eval_episodes)
    welfare, returns, apples, waste = [], [], [], []
    for s in eval_seeds:
        _, w, ret, ap, wd = runner.episode(s, 0.0, eval_rng, learn=False)
        welfare.append(float(w))
        returns.append(ret)
        apples.append(ap)
        waste.append(wd)
    returns = np.mean(returns, axis=0)
    h, c = (np.flatnonzero(runner.types == t) for t in (HARVESTER, CLEANER))
    window = min(tc.moving_average, max(tc.episodes // 2, 1))
    last, prev = np.mean(curve[-window:]), np.mean(curve[-2 * window:-window] or curve[-window:])
    converged = bool(abs(last - prev) <= tc.convergence_tolerance * max(1.0, abs(prev)))
    return TrainReport(
        design=design,
        seed=seed,
        episodes=tc.episodes,
        collective_rewards=curve,
        welfare=float(np.mean(welfare)),
        welfare_per_episode=welfare,
        harvester_returns=[float(v) for v in returns[h]],
        cleaner_returns=[float(v) for v in returns[c]],
        apples_timeline=[float(v) for v in np.median(apples, axis=0)],
        waste_timeline=[float(v) for v in np.median(waste, axis=0)],
        converged=converged,
        max_abs_q=runner.q.max_abs(),
        q_table=runner.q if keep_q else None,
    )


def evaluate_contract(report: TrainReport, baseline_returns: Sequence[float] | None, min_return: float = 0.0) -> EvaluationRecord:
    """Map a trained contract to the record the outer optimizer consumes."""
    if baseline_returns is None or len(baseline_returns) == 0:
        raise PreconditionError("baseline harvester returns are required")
    if len(baseline_returns) != len(report.harvester_returns):
        raise PreconditionError("baseline and contract harvester counts differ")
    slack = tuple(float(a - b) for a, b in zip(report.harvester_returns, baseline_returns))
    if report.design.n_added == 0:
        # the baseline contract is its own reference
        slack = tuple(0.0 for _ in slack) if report.design.alpha == 0.0 else slack
    phi = int(all(r >= min_return for r in report.cleaner_returns))
    return EvaluationRecord(report.design, report.welfare, slack, phi)


class MarlEvaluator:
    """Evaluator callable for the optimization loop in MARL mode.

    Baseline returns are trained once per seed and reused. Every design gets
    its own training seed derived from ``(seed, alpha, n_added)`` so results
    do not depend on evaluation order.
    """

    def __init__(self, env_config: CleanupConfig | None = None, train_config: TrainConfig | None = None,
                 seed: int = 0, min_return: float = 0.0):
        self.env_config = env_config or CleanupConfig()
        self.train_config = train_config or TrainConfig()
        self.seed = seed
        self.min_return = min_return
        self.reports: dict[DesignPoint, TrainReport] = {}
        self._baseline: TrainReport | None = None

    def design_seed(self, design: DesignPoint) -> int:
        ss = np.random.SeedSequence([self.seed, int(round(design.alpha * 10**6)), design.n_added])
        return int(ss.generate_state(1)[0])

    def report(self, design: DesignPoint) -> TrainReport:
        if design not in self.reports:
            self.reports[design] = train(design, self.env_config, self.train_config, self.design_seed(design))
        return self.reports[design]

    @property
    def baseline(self) -> TrainReport:
        if self._baseline is None:
            self._baseline = self.report(DesignPoint(0.0, 0))
        return self._baseline

    def __call__(self, design: DesignPoint) -> EvaluationRecord:
        if design.alpha > 0.0 and design.n_added == 0:
            raise ConfigurationError(f"{design}: a positive tax needs at least one cleaner")
        return evaluate_contract(self.report(design), self.baseline.harvester_returns, self.min_return)


# ---------------------------------------------------------------- matrix-game sanity check


def matrix_game_check(payoff_row: np.ndarray, payoff_col: np.ndarray, updates: int = 10_000, seed: int = 0,
                      learning_rate: float = 0.1, gamma: float = 0.5, epsilon: float = 0.2):
    """Learn a repeated 2x2 game with two single-agent types.

    Each player conditions on the other's previous action through the mean
    action grid. Returns the greedy joint action and whether it is a mutual
    best response under the true payoffs.
    """
    A = np.asarray(payoff_row, dtype=float)
    B = np.asarray(payoff_col, dtype=float)
    grid = MeanActionGrid(group_of_action=(0, 1), divisions=1, empty_group=0)
    q = QTable.zeros(2, 1, grid.size, 2)
    rng = np.random.default_rng(seed)
    prev = np.array([0, 0])
    key = np.zeros(1, dtype=np.int64)
    for _ in range(updates):
        mean = (grid.index(prev[:1]), grid.index(prev[1:]))
        acts = np.empty(2, dtype=np.int64)
        for t in range(2):
            qv = q.values(t, key, mean)[0]
            acts[t] = rng.integers(2) if rng.random() < epsilon else int(np.argmax(qv + rng.random(2) * 1e-9))
        rewards = (A[acts[0], acts[1]], B[acts[0], acts[1]])
        nxt = (grid.index(acts[:1]), grid.index(acts[1:]))
        for t in range(2):
            mtmfq_update(q, Transition(t, key, acts[t:t + 1], np.array([rewards[t]]), key, False), (mean, nxt),
                         learning_rate, gamma)
        prev = acts
    # greedy fixed point: iterate greedy responses from the last joint action
    joint = prev.copy()
    for _ in range(10):
        mean = (grid.index(joint[:1]), grid.index(joint[1:]))
        new = np.array([int(np.argmax(q.values(t, key, mean)[0])) for t in range(2)])
        if np.array_equal(new, joint):
            break
        joint = new
    i, j = joint
    mutual = A[i, j] >= A[:, j].max() and B[i, j] >= B[i, :].max()
    return (int(i), int(j)), bool(mutual)
