"""Constrained Pareto max-value entropy search for contract design."""

from .core import ConfigurationError, DesignPoint, EvaluationRecord

__all__ = ["ConfigurationError", "DesignPoint", "EvaluationRecord"]
__version__ = "0.1.0"
