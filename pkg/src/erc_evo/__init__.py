"""Risk-parity (equal risk contribution) portfolios via a genetic algorithm
followed by local search, with convex reference solvers for verification."""

from erc_evo.errors import (
    ConvergenceError,
    DataError,
    DegenerateRiskError,
    GuardError,
    InfeasibleBoundsError,
)
from erc_evo.risk import (
    Bounds,
    RiskReport,
    fitness_marginal,
    fitness_total,
    marginal_contributions,
    normalized_contributions,
    portfolio_risk,
    repair_normalize,
    risk_report,
    total_contributions,
    validate_covariance,
)
from erc_evo.evolution import GaConfig, GaResult, run_ga
from erc_evo.local_search import LsConfig, LsResult, run_local_search
from erc_evo.oracle import (
    enumerate_orthants,
    equal_weight,
    mvp_solve,
    solve_longonly_barrier,
    solve_orthant,
)

__version__ = "0.1.0"

__all__ = [
    "Bounds",
    "ConvergenceError",
    "DataError",
    "DegenerateRiskError",
    "GaConfig",
    "GaResult",
    "GuardError",
    "InfeasibleBoundsError",
    "LsConfig",
    "LsResult",
    "RiskReport",
    "enumerate_orthants",
    "equal_weight",
    "fitness_marginal",
    "fitness_total",
    "marginal_contributions",
    "mvp_solve",
    "normalized_contributions",
    "portfolio_risk",
    "repair_normalize",
    "risk_report",
    "run_ga",
    "run_local_search",
    "solve_longonly_barrier",
    "solve_orthant",
    "total_contributions",
    "validate_covariance",
]
