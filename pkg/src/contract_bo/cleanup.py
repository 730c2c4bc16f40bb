"""Clean-up gridworld: harvesters collect apples, cleaners remove river waste.

Apples respawn on the harvest rows with a probability that falls linearly
with the river's waste density and hits zero at ``pollution_threshold``.
Rewards pass through a linear tax contract: harvesters keep ``1 - alpha`` of
their harvest and the taxed share is split equally among the cleaners.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import _kernels
from .core import ConfigurationError

UP, DOWN, LEFT, RIGHT, STAY, INTERACT = range(6)
N_ACTIONS = 6
ACTION_NAMES = ("up", "down", "left", "right", "stay", "interact")
MOVES = np.array([[-1, 0], [1, 0], [0, -1], [0, 1], [0, 0], [0, 0]])
HARVESTER, CLEANER = 0, 1


@dataclass(frozen=True)
class CleanupConfig:
    width: int = 15
    height: int = 8
    river_rows: tuple[int, int] = (0, 3)  # half-open row range
    harvest_rows: tuple[int, int] = (4, 8)
    waste_spawn_prob: float = 0.04
    apple_spawn_base_prob: float = 0.15
    pollution_threshold: float = 0.4
    initial_apple_density: float = 0.5
    initial_waste_density: float = 0.0
    episode_length: int = 200
    harvest_reward: float = 1.0
    cost_harvester: float = 0.01  # per step
    cost_cleaner: float = 0.05  # per cleaning action
    gamma: float = 0.99
    view_radius: int = 2

    def __post_init__(self):
        object.__setattr__(self, "river_rows", tuple(self.river_rows))
        object.__setattr__(self, "harvest_rows", tuple(self.harvest_rows))
        r0, r1 = self.river_rows
        h0, h1 = self.harvest_rows
        if not (0 <= r0 < r1 <= self.height and 0 <= h0 < h1 <= self.height):
            raise ConfigurationError("regions must lie within the grid")
        if r1 > h0 and h1 > r0:
            raise ConfigurationError("river and harvest regions must be disjoint")
        for name in ("waste_spawn_prob", "apple_spawn_base_prob", "pollution_threshold",
                     "initial_apple_density", "initial_waste_density"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1]")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigurationError("gamma must lie in (0, 1)")
        if self.episode_length < 1 or self.view_radius < 1:
            raise ConfigurationError("episode_length and view_radius must be positive")

    @property
    def river_mask(self) -> np.ndarray:
        m = np.zeros((self.height, self.width), dtype=bool)
        m[self.river_rows[0]:self.river_rows[1]] = True
        return m

    @property
    def harvest_mask(self) -> np.ndarray:
        m = np.zeros((self.height, self.width), dtype=bool)
        m[self.harvest_rows[0]:self.harvest_rows[1]] = True
        return m

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CleanupConfig":
        names = {f.name for f in fields(cls)}
        if set(d) - names:
            raise ConfigurationError(f"unknown environment keys {sorted(set(d) - names)}")
        return cls(**d)


def desk_config(**overrides) -> CleanupConfig:
    """Reduced 9x6 layout with a single river row and full view.

    Waste spawns slower and cleaning is cheaper than in the full map so that
    a tabular learner sees the payoff of cleaning within a few thousand
    episodes; the discount is shortened for the same reason.
    """
    base = dict(width=9, height=6, river_rows=(0, 1), harvest_rows=(2, 6), view_radius=8,
                waste_spawn_prob=0.008, cost_cleaner=0.01, gamma=0.95)
    base.update(overrides)
    return CleanupConfig(**base)


@dataclass
class EnvState:
    positions: np.ndarray  # (n, 2) row, col
    orientations: np.ndarray  # (n,) last movement direction
    agent_types: np.ndarray  # (n,) HARVESTER or CLEANER
    apples: np.ndarray  # (H, W) bool
    waste: np.ndarray  # (H, W) bool
    timestep: int
    rng_state: dict = field(repr=False)

    @property
    def n_agents(self) -> int:
        return len(self.agent_types)

    def copy(self) -> "EnvState":
        return EnvState(
            self.positions.copy(), self.orientations.copy(), self.agent_types.copy(),
            self.apples.copy(), self.waste.copy(), self.timestep, json.loads(json.dumps(self.rng_state)),
        )

    def waste_density(self, config: CleanupConfig) -> float:
        return float(self.waste[config.river_mask].mean())


@dataclass(frozen=True)
class StepEvents:
    harvested: np.ndarray  # (n,) 0/1
    cleaned: np.ndarray  # (n,) 0/1
    apples_spawned: int
    waste_spawned: int


@dataclass(frozen=True)
class ContractRewardWiring:
    alpha: float
    n_cleaners: int

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError("alpha must lie in [0, 1]")
        if self.n_cleaners < 0:
            raise ConfigurationError("n_cleaners must be non-negative")
        if self.alpha > 0.0 and self.n_cleaners == 0:
            raise ConfigurationError("a positive tax needs at least one cleaner to receive it")


def _make_rng(seed_or_state) -> np.random.Generator:
    rng = np.random.Generator(np.random.PCG64())
    if isinstance(seed_or_state, dict):
        rng.bit_generator.state = seed_or_state
    else:
        rng = np.random.Generator(np.random.PCG64(seed_or_state))
    return rng


class CleanupEnv:
    """Mutable environment for training loops; :func:`reset`/:func:`step` wrap it functionally.

    The live generator is ``self.rng``; ``state.rng_state`` is only refreshed
    by the functional wrappers.
    """

    def __init__(self, config: CleanupConfig):
        self.config = config
        self.river = config.river_mask
        self.harvest = config.harvest_mask
        self.n_river = int(self.river.sum())
        self.state: EnvState | None = None
        self.rng: np.random.Generator | None = None

    def reset(self, n_harvesters: int, n_cleaners: int, seed) -> EnvState:
        if n_harvesters < 0 or n_cleaners < 0:
            raise ConfigurationError("agent counts must be non-negative")
        cfg = self.config
        rng = _make_rng(seed)
        h_cells = np.argwhere(self.harvest)
        r_cells = np.argwhere(self.river)
        if n_harvesters > len(h_cells) or n_cleaners > len(r_cells):
            raise ConfigurationError("more agents than spawnable cells")
        pos_h = h_cells[rng.choice(len(h_cells), n_harvesters, replace=False)]
        pos_c = r_cells[rng.choice(len(r_cells), n_cleaners, replace=False)]
        positions = np.concatenate([pos_h, pos_c]).reshape(-1, 2).astype(np.int64)
        types = np.array([HARVESTER] * n_harvesters + [CLEANER] * n_cleaners, dtype=np.int64)
        apples = np.zeros((cfg.height, cfg.width), dtype=bool)
        n_apples = int(round(cfg.initial_apple_density * len(h_cells)))
        idx = h_cells[rng.choice(len(h_cells), n_apples, replace=False)]
        apples[idx[:, 0], idx[:, 1]] = True
        waste = np.zeros_like(apples)
        n_waste = int(round(cfg.initial_waste_density * len(r_cells)))
        idx = r_cells[rng.choice(len(r_cells), n_waste, replace=False)]
        waste[idx[:, 0], idx[:, 1]] = True
        self.rng = rng
        self.state = EnvState(positions, np.full(len(types), DOWN), types, apples, waste, 0, rng.bit_generator.state)
        return self.state

    def step(self, joint_action) -> StepEvents:
        s, cfg, rng = self.state, self.config, self.rng
        actions = np.asarray(joint_action)
        n = s.n_agents
        if actions.shape != (n,) or not np.issubdtype(actions.dtype, np.integer) or np.any(actions < 0) or np.any(actions >= N_ACTIONS):
            raise ConfigurationError(f"joint action must be {n} integers in [0, {N_ACTIONS})")
        harvested = np.zeros(n, dtype=np.int64)
        cleaned = np.zeros(n, dtype=np.int64)
        prio_u = rng.random(n)  # collision priority: ascending draw moves first
        spawn_u = rng.random((2, cfg.height, cfg.width))
        new_a, new_w = _kernels.transition(
            s.positions, s.orientations, s.agent_types, s.apples, s.waste, actions.astype(np.int64), prio_u, spawn_u,
            self.river, self.harvest, cfg.waste_spawn_prob, cfg.apple_spawn_base_prob, cfg.pollution_threshold,
            harvested, cleaned,
        )
        s.timestep += 1
        return StepEvents(harvested, cleaned, int(new_a), int(new_w))

    def observe(self, radius: int | None = None) -> np.ndarray:
        """Egocentric windows for all agents: (n, 5, 2r+1, 2r+1).

        Channels: apples, waste, harvesters, cleaners, wall. Each agent's own
        cell is excluded from the agent channels.
        """
        return observe(self.config, self.state, radius)


def grid_channels(config: CleanupConfig, state: EnvState) -> np.ndarray:
    ch = np.zeros((4, config.height, config.width), dtype=np.int8)
    ch[0] = state.apples
    ch[1] = state.waste
    for t in (HARVESTER, CLEANER):
        p = state.positions[state.agent_types == t]
        np.add.at(ch[2 + t], (p[:, 0], p[:, 1]), 1)
    return ch


def observe(config: CleanupConfig, state: EnvState, radius: int | None = None) -> np.ndarray:
    r = config.view_radius if radius is None else radius
    ch = grid_channels(config, state)
    padded = np.zeros((5, config.height + 2 * r, config.width + 2 * r), dtype=np.int8)
    padded[4] = 1
    padded[:4, r:r + config.height, r:r + config.width] = ch
    padded[4, r:r + config.height, r:r + config.width] = 0
    rows = state.positions[:, 0][:, None] + np.arange(2 * r + 1)[None, :]
    cols = state.positions[:, 1][:, None] + np.arange(2 * r + 1)[None, :]
    win = padded[:, rows[:, :, None], cols[:, None, :]]  # (5, n, w, w)
    win = np.moveaxis(win, 1, 0).copy()
    idx = np.arange(state.n_agents)
    win[idx, 2 + state.agent_types, r, r] -= 1
    return win


def reset(config: CleanupConfig, n_harvesters: int, n_cleaners: int, seed: int) -> EnvState:
    return CleanupEnv(config).reset(n_harvesters, n_cleaners, seed).copy()


def step(config: CleanupConfig, state: EnvState, joint_action) -> tuple[EnvState, StepEvents]:
    """Pure transition: returns a new state and the step's events."""
    env = CleanupEnv(config)
    env.state = state.copy()
    env.rng = _make_rng(state.rng_state)
    events = env.step(joint_action)
    env.state.rng_state = env.rng.bit_generator.state
    return env.state, events


def contract_rewards(events: StepEvents, agent_types: np.ndarray, wiring: ContractRewardWiring, config: CleanupConfig):
    """Per-agent contract rewards and the principal's welfare increment for one step.

    Harvesters get ``(1 - alpha) * harvest - c_j``; every cleaner gets an equal
    share of the taxed harvest minus ``c_k`` when it cleaned. Welfare counts
    intrinsic harvest minus all costs (the tax is a transfer).
    """
    types = np.asarray(agent_types)
    is_h = types == HARVESTER
    n_c = int((~is_h).sum())
    if n_c != wiring.n_cleaners:
        raise ConfigurationError("wiring does not match the agent roster")
    intrinsic = config.harvest_reward * events.harvested
    rewards = np.empty(len(types))
    taxed = wiring.alpha * intrinsic[is_h]
    rewards[is_h] = intrinsic[is_h] - taxed - config.cost_harvester
    pool = taxed.sum()
    if n_c:
        rewards[~is_h] = pool / n_c - config.cost_cleaner * events.cleaned[~is_h]
    welfare = float(intrinsic[is_h].sum() - config.cost_harvester * is_h.sum() - config.cost_cleaner * events.cleaned[~is_h].sum())
    return rewards, welfare, float(pool)


def render(config: CleanupConfig, state: EnvState) -> str:
    """ASCII frame: ``~`` river, ``#`` waste, ``o`` apple, ``H``/``C`` agents, ``.`` other."""
    rows = []
    river = config.river_mask
    for r in range(config.height):
        line = []
        for c in range(config.width):
            ch = "~" if river[r, c] else "."
            if state.waste[r, c]:
                ch = "#"
            if state.apples[r, c]:
                ch = "o"
            line.append(ch)
        rows.append(line)
    for (r, c), t in zip(state.positions, state.agent_types):
        rows[r][c] = "H" if t == HARVESTER else "C"
    return f"t={state.timestep}\n" + "\n".join("".join(line) for line in rows)


METRICS_HEADER = ("episode", "timestep", "collective_reward", "welfare", "apples", "waste_density")


def write_metrics_csv(path, rows) -> None:
    """Write per-timestep episode metrics; ``rows`` are tuples in ``METRICS_HEADER`` order."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRICS_HEADER)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
