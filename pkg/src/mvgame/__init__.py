"""N-player mean-variance portfolio games under relative performance criteria.

Full-information closed-form equilibria, partial-information equilibria built
on the Wonham filter and two degenerate Cauchy problems, and the systemic-risk
simulations (wealth paths, default counts, loss distributions) built on them.
"""

from mvgame.core_model import (
    EquilibriumCoefficients,
    InvestorParams,
    MarketParams,
    NumericalError,
    ParameterError,
    compute_coefficients,
    model_functions,
)
from mvgame.stochastic_engine import PathBundle, PosteriorPath, TimeGrid, make_rng
from mvgame.cauchy import CauchyTable, MCConfig, build_tables, solve_cauchy_fd
from mvgame.equilibrium import Profile, StrategyKind, strategy_terms, value_function
from mvgame.game_sim import Scenario, loss_distribution, run_realization

__all__ = [
    "EquilibriumCoefficients",
    "CauchyTable",
    "InvestorParams",
    "MCConfig",
    "MarketParams",
    "NumericalError",
    "ParameterError",
    "PathBundle",
    "PosteriorPath",
    "Profile",
    "Scenario",
    "StrategyKind",
    "TimeGrid",
    "build_tables",
    "compute_coefficients",
    "loss_distribution",
    "make_rng",
    "model_functions",
    "run_realization",
    "solve_cauchy_fd",
    "strategy_terms",
    "value_function",
]

__version__ = "0.1.0"
