"""Instantly evaluable synthetic Clean-up contract problem with a known optimum.

The tables are produced by a small stylized economy perturbed by short
lengthscale random fields (random Fourier features), which make the
landscape rugged enough that greedy acquisition can stall:

* recruited cleaners clean only when paid, with effort saturating in the tax,
  ``effort = (n / max_added) * (1 - exp(-alpha / tau))``;
* each harvester's intrinsic return grows with cleaning effort and shrinks
  with the tax, times a harvester-specific random field;
* harvester IR slack is post-tax return minus the return at the baseline
  contract ``(0, 0)``, so the baseline is always exactly feasible;
* the recruited-agent indicator thresholds the per-cleaner tax income minus
  cleaning cost, perturbed by another field.

All randomness comes from a Philox counter-based generator keyed by
``(seed, attempt)`` so instances are reproducible across platforms.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ConfigurationError, DesignPoint, EvaluationRecord, design_lattice, encode

log = logging.getLogger(__name__)

GENERATOR_VERSION = 1
FEASIBLE_FRACTION = (0.10, 0.25)
MAX_ATTEMPTS = 100


@dataclass(frozen=True)
class SyntheticInstance:
    lattice: tuple[DesignPoint, ...]
    objective_table: dict
    ir_table: dict
    phi_table: dict
    optimum: tuple[DesignPoint, float]
    seed: int
    n_baseline: int
    max_added: int
    alpha_grid_size: int
    attempt: int = 0

    def feasible(self, d: DesignPoint) -> bool:
        return self.phi_table[d] == 1 and min(self.ir_table[d]) >= 0.0

    @property
    def feasible_fraction(self) -> float:
        return sum(self.feasible(d) for d in self.lattice) / len(self.lattice)

    @property
    def max_lattice_objective(self) -> float:
        return max(self.objective_table.values())

    def to_dict(self) -> dict:
        return {
            "generator_version": GENERATOR_VERSION,
            "seed": self.seed,
            "attempt": self.attempt,
            "n_baseline": self.n_baseline,
            "max_added": self.max_added,
            "alpha_grid_size": self.alpha_grid_size,
            "designs": [
                {
                    "alpha": d.alpha,
                    "n_added": d.n_added,
                    "objective": self.objective_table[d],
                    "ir_slack": list(self.ir_table[d]),
                    "phi": self.phi_table[d],
                }
                for d in self.lattice
            ],
            "optimum": {"alpha": self.optimum[0].alpha, "n_added": self.optimum[0].n_added, "value": self.optimum[1]},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticInstance":
        lattice, obj, ir, phi = [], {}, {}, {}
        for row in d["designs"]:
            p = DesignPoint(row["alpha"], row["n_added"])
            lattice.append(p)
            obj[p] = float(row["objective"])
            ir[p] = tuple(float(v) for v in row["ir_slack"])
            phi[p] = int(row["phi"])
        o = d["optimum"]
        return cls(
            tuple(lattice), obj, ir, phi, (DesignPoint(o["alpha"], o["n_added"]), float(o["value"])),
            d["seed"], d["n_baseline"], d["max_added"], d["alpha_grid_size"], d.get("attempt", 0),
        )

    @classmethod
    def from_json(cls, text: str) -> "SyntheticInstance":
        return cls.from_dict(json.loads(text))


def _rng(seed: int, attempt: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, attempt, GENERATOR_VERSION])))


def _fourier_field(rng, X: np.ndarray, lengthscale: float, n_features: int = 64) -> np.ndarray:
    """Unit-variance stationary field with squared-exponential covariance."""
    W = rng.normal(0.0, 1.0 / lengthscale, size=(n_features, X.shape[1]))
    b = rng.uniform(0.0, 2 * np.pi, size=n_features)
    return np.sqrt(2.0 / n_features) * np.cos(X @ W.T + b).sum(axis=1)


# Shape parameters of the stylized economy; ranges are sampled per instance.
KNOBS = {
    "tau": (0.03, 0.10),  # tax scale at which cleaning effort saturates
    "gain": (0.6, 1.1),  # harvest multiplier from full cleaning effort
    "damp": (0.2, 0.6),  # harvest loss per unit tax
    "harvest_field": (0.1, 0.1),  # log-amplitude of shared / own harvester fields
    "harvest_lengthscale": (0.01, 0.03),
    "objective_field": 0.25,  # relative amplitude of the welfare field
    "objective_lengthscale": (0.01, 0.03),
    "cleaner_cost": (20.0, 60.0),
    "participation": 1.0,  # share of the cleaner cost paid even when idle
    "phi_field": 150.0,
    "phi_lengthscale": (0.01, 0.03),
}


def _build(seed, n_baseline, max_added, alpha_grid_size, attempt, knobs=None):
    k = {**KNOBS, **(knobs or {})}
    rng = _rng(seed, attempt)
    lattice = design_lattice(alpha_grid_size, max_added)
    X = encode(lattice, max_added)
    u, v = X[:, 0], X[:, 1]
    n = np.array([d.n_added for d in lattice])
    base = np.array([d.alpha == 0.0 and d.n_added == 0 for d in lattice])

    tau = rng.uniform(*k["tau"])
    gain = rng.uniform(*k["gain"])
    damp = rng.uniform(*k["damp"])
    paid = 1.0 - np.exp(-u / tau)
    effort = v * paid
    shared = _fourier_field(rng, X, rng.uniform(*k["harvest_lengthscale"]))

    harvest = np.empty((n_baseline, len(lattice)))
    a_shared, a_own = k["harvest_field"]
    for j in range(n_baseline):
        h0 = 300.0 * rng.uniform(0.8, 1.2)
        own = _fourier_field(rng, X, rng.uniform(*k["harvest_lengthscale"]))
        harvest[j] = h0 * (1.0 + gain * effort) * (1.0 - damp * u) * np.exp(a_shared * shared + a_own * own)
    baseline_return = harvest[:, base][:, 0]
    slack = (1.0 - u) * harvest - baseline_return[:, None]
    slack[:, base] = 0.0

    cleaner_cost = rng.uniform(*k["cleaner_cost"])
    total = harvest.sum(axis=0)
    g_field = _fourier_field(rng, X, rng.uniform(*k["objective_lengthscale"]))
    cost = cleaner_cost * (k["participation"] + (1.0 - k["participation"]) * paid)
    objective = total - n * cost + k["objective_field"] * total.mean() * g_field

    income = np.where(n > 0, u * total / np.maximum(n, 1), 0.0)
    phi_field = _fourier_field(rng, X, rng.uniform(*k["phi_lengthscale"]))
    margin = income - cost + k["phi_field"] * phi_field
    phi = np.where(n == 0, 1, (margin >= 0.0).astype(int))
    return lattice, objective, slack.T, phi


def generate(
    seed: int, n_baseline: int = 5, max_added: int = 3, alpha_grid_size: int = 101, knobs: dict | None = None
) -> SyntheticInstance:
    """Deterministic instance whose feasible fraction lies in [0.10, 0.25].

    Out-of-band draws are regenerated with the next sub-seed (logged); after
    ``MAX_ATTEMPTS`` failures a :class:`ConfigurationError` is raised.
    """
    if alpha_grid_size < 2:
        raise ConfigurationError("alpha_grid_size must be at least 2")
    if n_baseline < 1 or max_added < 0:
        raise ConfigurationError("need n_baseline >= 1 and max_added >= 0")
    for attempt in range(MAX_ATTEMPTS):
        lattice, objective, slack, phi = _build(seed, n_baseline, max_added, alpha_grid_size, attempt, knobs)
        feasible = (phi == 1) & (slack.min(axis=1) >= 0.0)
        frac = feasible.mean()
        if not (FEASIBLE_FRACTION[0] <= frac <= FEASIBLE_FRACTION[1]):
            log.info("seed %d attempt %d: feasible fraction %.3f out of band, regenerating", seed, attempt, frac)
            continue
        best = int(np.flatnonzero(feasible)[np.argmax(objective[feasible])])
        return SyntheticInstance(
            lattice=tuple(lattice),
            objective_table={d: float(objective[i]) for i, d in enumerate(lattice)},
            ir_table={d: tuple(float(s) for s in slack[i]) for i, d in enumerate(lattice)},
            phi_table={d: int(phi[i]) for i, d in enumerate(lattice)},
            optimum=(lattice[best], float(objective[best])),
            seed=seed,
            n_baseline=n_baseline,
            max_added=max_added,
            alpha_grid_size=alpha_grid_size,
            attempt=attempt,
        )
    raise ConfigurationError(f"no instance with feasible fraction in {FEASIBLE_FRACTION} after {MAX_ATTEMPTS} attempts")


def evaluate(instance: SyntheticInstance, design: DesignPoint) -> EvaluationRecord:
    if design not in instance.objective_table:
        raise ConfigurationError(f"{design} is not on the instance lattice")
    return EvaluationRecord(
        design,
        instance.objective_table[design],
        instance.ir_table[design],
        instance.phi_table[design],
    )


def brute_force_optimum(instance: SyntheticInstance, designs: Sequence[DesignPoint] | None = None):
    best = None
    for d in designs if designs is not None else instance.lattice:
        rec = evaluate(instance, d)
        if rec.feasible and (best is None or rec.principal_objective > best[1]):
            best = (d, rec.principal_objective)
    return best
