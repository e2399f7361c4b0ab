"""DC security-constrained optimal power flow with fast outage screening.

The package solves the preventive-corrective DC SCOPF two ways: a Benders
decomposition that screens outages with rank-one inverse updates, and a
single extensive-form LP used as the reference.
"""
from .errors import (
    CaseFormatError,
    ConvergenceError,
    DisconnectedNetworkError,
    InfeasibleError,
    IslandingError,
    NetworkError,
    ScopfError,
)
from .grid import GridMatrices, dc_power_flow
from .network import Branch, Demand, Generator, Network
from .solver import ScopfOptions, ScopfSolution, build_base_opf, solve_benders, solve_extensive

__version__ = "0.1.0"

__all__ = [
    "Branch",
    "CaseFormatError",
    "ConvergenceError",
    "Demand",
    "DisconnectedNetworkError",
    "Generator",
    "GridMatrices",
    "InfeasibleError",
    "IslandingError",
    "Network",
    "NetworkError",
    "ScopfError",
    "ScopfOptions",
    "ScopfSolution",
    "build_base_opf",
    "dc_power_flow",
    "solve_benders",
    "solve_extensive",
]
