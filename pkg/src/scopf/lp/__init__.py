"""Deterministic linear-programming layer."""
from .model import INF, LpModel, LpSolution
from .simplex import simplex

__all__ = ["INF", "LpModel", "LpSolution", "simplex"]
