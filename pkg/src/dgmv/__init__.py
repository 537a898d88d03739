"""Minimum-variance books of primary and derivative instruments via the
delta-gamma approximation."""

from .errors import DgmvError, ModelError, SolverError
from .hedging import HedgeProblem, HedgeSolution, solve_hedge
from .instruments import GreekBundle, InstrumentDef, Kind, greeks
from .market import FactorModel, PortfolioSpec, make_portfolio, validate_factor_model, weights_from_shares
from .moments import mean, mgf_exponent, second_moment, variance
from .optimizer import MVSolution, frontier, solve_p5, solve_p6
from .oracle import McConfig, simulate_exact, simulate_quadratic
from .reduction import MVProblem, QuadraticReduction, aggregate, assemble_problem, reduce

__all__ = [
    "DgmvError", "ModelError", "SolverError",
    "FactorModel", "PortfolioSpec", "make_portfolio", "validate_factor_model", "weights_from_shares",
    "GreekBundle", "InstrumentDef", "Kind", "greeks",
    "QuadraticReduction", "MVProblem", "aggregate", "reduce", "assemble_problem",
    "mean", "variance", "second_moment", "mgf_exponent",
    "MVSolution", "solve_p5", "solve_p6", "frontier",
    "HedgeProblem", "HedgeSolution", "solve_hedge",
    "McConfig", "simulate_quadratic", "simulate_exact",
]
