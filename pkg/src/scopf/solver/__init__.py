"""SCOPF solution methods and the a-posteriori verifier."""
from .benders import BendersCut, MainProblem, build_base_opf, solve_benders
from .extensive import build_extensive, solve_extensive
from .formulation import CutRecord, ScopfOptions, ScopfSolution
from .verify import VerificationReport, Violation, verify_solution

__all__ = [
    "BendersCut",
    "CutRecord",
    "MainProblem",
    "ScopfOptions",
    "ScopfSolution",
    "build_base_opf",
    "build_extensive",
    "solve_benders",
    "solve_extensive",
    "VerificationReport",
    "Violation",
    "verify_solution",
]
