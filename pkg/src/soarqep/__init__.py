"""Restarted second-order Arnoldi solver for quadratic eigenvalue problems."""

from .driver import SolverConfig, SolverReport, solve
from .operator import QepProblem, build_operator
from .problems import (gen_mass_spring, gen_string_damping, load_matrix_market,
                       read_matrix_market, write_matrix_market)

__all__ = [
    "QepProblem",
    "SolverConfig",
    "SolverReport",
    "build_operator",
    "gen_mass_spring",
    "gen_string_damping",
    "load_matrix_market",
    "read_matrix_market",
    "write_matrix_market",
    "solve",
]

__version__ = "0.1.0"
