"""Limit-order exchange with patient sellers and impatient buyers.

Queueing analytics for a preemptive-priority order book, the sellers'
equilibrium posting distribution, closed forms for the inelastic-demand
regime, and a discrete-event simulator to check them against.
"""

from .equilibrium import (
    EquilibriumNotConverged,
    EquilibriumResult,
    NoFeasiblePosting,
    TwoPriceProblem,
    best_response,
    psi_map,
    solve_equilibrium,
    two_price_equilibrium,
)
from .inelastic import InelasticParams
from .market import DemandCurve, MarketConfig, PatienceDistribution, example_config, validate
from .queueing import analyze, execution_time, expected_inventory
from .simulator import SimConfig, empirical_best_response, run

__version__ = "0.1.0"

__all__ = [
    "DemandCurve",
    "EquilibriumNotConverged",
    "EquilibriumResult",
    "InelasticParams",
    "MarketConfig",
    "NoFeasiblePosting",
    "PatienceDistribution",
    "SimConfig",
    "TwoPriceProblem",
    "analyze",
    "best_response",
    "empirical_best_response",
    "execution_time",
    "expected_inventory",
    "example_config",
    "psi_map",
    "run",
    "solve_equilibrium",
    "two_price_equilibrium",
    "validate",
]
