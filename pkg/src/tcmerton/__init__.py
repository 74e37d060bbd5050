"""Merton portfolio problem with fixed and proportional transaction costs.

The package solves the leading-order corrector problem at frozen wealth: an
ergodic impulse-control problem for the deviation from the frictionless
Merton position, discretised as a Markov chain and solved by policy
iteration.  Around it sit the frictionless solution, the solvency geometry,
semi-analytic one-dimensional benchmarks, long-run occupation measures and
trade-region maps.
"""

from .analytic import SmoothFit1D, auto_grid, fixedcost_2d_report, refit_grid, smoothfit_1d
from .corrector import AsymptoticScale, CorrectorProblem, alpha_matrix, make_problem
from .errors import ModelError, SolverError
from .geometry import CostStructure, CostVariant, Position
from .grid import Grid, discretize_generator
from .longterm import OccupationMeasure, simulate_occupation, stationary_distribution
from .market import FrictionlessSolution, MarketModel, Preferences, merton_solution, value_derivatives
from .regions import RegionMap, boundary_extract, classify
from .solver import Policy, PolicySolution, policy_evaluation, policy_improvement, solve_corrector

__version__ = "0.1.0"

__all__ = [
    "AsymptoticScale", "CorrectorProblem", "CostStructure", "CostVariant", "FrictionlessSolution",
    "Grid", "MarketModel", "ModelError", "OccupationMeasure", "Policy", "PolicySolution", "Position",
    "Preferences", "RegionMap", "SmoothFit1D", "SolverError", "alpha_matrix", "auto_grid",
    "boundary_extract", "classify", "discretize_generator", "fixedcost_2d_report", "make_problem",
    "merton_solution", "policy_evaluation", "policy_improvement", "refit_grid", "simulate_occupation",
    "smoothfit_1d", "solve_corrector", "stationary_distribution", "value_derivatives",
]
