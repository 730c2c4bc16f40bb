"""Design points, evaluation records and the discrete design lattice."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class ConfigurationError(ValueError):
    """Invalid configuration or argument."""


@dataclass(frozen=True, order=True)
class DesignPoint:
    """A contract: shared tax/incentive weight and number of recruited agents.

    Ordering is lexicographic on ``(alpha, n_added)`` which is also the
    tie-breaking order used by every selection rule.
    """

    alpha: float
    n_added: int

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0) or not math.isfinite(self.alpha):
            raise ConfigurationError(f"alpha must lie in [0, 1], got {self.alpha}")
        if int(self.n_added) != self.n_added or self.n_added < 0:
            raise ConfigurationError(f"n_added must be a non-negative integer, got {self.n_added}")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "n_added", int(self.n_added))

    def as_list(self) -> list:
        return [self.alpha, self.n_added]


@dataclass(frozen=True)
class EvaluationRecord:
    design: DesignPoint
    principal_objective: float
    ir_slack_baseline: tuple[float, ...]
    feasibility_indicator: int
    feasible: bool = field(default=None)  # derived when omitted

    def __post_init__(self):
        slack = tuple(float(s) for s in self.ir_slack_baseline)
        object.__setattr__(self, "ir_slack_baseline", slack)
        phi = int(self.feasibility_indicator)
        if phi not in (0, 1):
            raise ConfigurationError("feasibility_indicator must be 0 or 1")
        if self.design.n_added == 0 and phi != 1:
            raise ConfigurationError("feasibility_indicator must be 1 when no agents are recruited")
        object.__setattr__(self, "feasibility_indicator", phi)
        derived = (min(slack) >= 0.0 if slack else True) and phi == 1
        if self.feasible is None:
            object.__setattr__(self, "feasible", derived)
        elif bool(self.feasible) != derived:
            raise ConfigurationError("feasible flag inconsistent with slacks and indicator")

    def to_dict(self) -> dict:
        return {
            "alpha": self.design.alpha,
            "n_added": self.design.n_added,
            "principal_objective": self.principal_objective,
            "ir_slack_baseline": list(self.ir_slack_baseline),
            "feasibility_indicator": self.feasibility_indicator,
            "feasible": self.feasible,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationRecord":
        return cls(
            DesignPoint(d["alpha"], d["n_added"]),
            float(d["principal_objective"]),
            tuple(d["ir_slack_baseline"]),
            int(d["feasibility_indicator"]),
            bool(d["feasible"]),
        )


Evaluator = Callable[[DesignPoint], EvaluationRecord]


def alpha_grid(size: int) -> np.ndarray:
    """Evenly spaced tax values on [0, 1], rounded so 0.01 steps are exact decimals."""
    if size < 2:
        raise ConfigurationError("alpha grid needs at least 2 points")
    return np.round(np.linspace(0.0, 1.0, size), 12)


def design_lattice(alpha_grid_size: int, max_added: int) -> list[DesignPoint]:
    """Every lattice design, sorted by ``(alpha, n_added)``."""
    return [DesignPoint(a, n) for a in alpha_grid(alpha_grid_size) for n in range(max_added + 1)]


def no_idle_tax(d: DesignPoint) -> DesignPoint:
    """Collapse ``(alpha > 0, 0)`` onto ``(0, 0)``: a tax with nobody to pay is not a contract."""
    return DesignPoint(0.0, 0) if d.n_added == 0 and d.alpha > 0 else d


def snap_alpha(alpha: float, alpha_grid_size: int | None) -> float:
    if alpha_grid_size is None:
        return float(min(max(alpha, 0.0), 1.0))
    step = 1.0 / (alpha_grid_size - 1)
    idx = int(round(min(max(alpha, 0.0), 1.0) / step))
    return float(round(idx * step, 12))


def encode(points: Sequence[DesignPoint], max_added: int) -> np.ndarray:
    """Map designs to the unit square: ``(alpha, n_added / max_added)``."""
    scale = float(max_added) if max_added > 0 else 1.0
    if len(points) == 0:
        return np.zeros((0, 2))
    return np.array([[p.alpha, p.n_added / scale] for p in points], dtype=float)
