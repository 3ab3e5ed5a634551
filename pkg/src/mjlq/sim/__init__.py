"""Path sampling, exact trajectory integration, and Monte Carlo checks."""

from .chain import ChainPath, path_rng, sample_chain, sample_chain_batch
from .kernels import accumulate_costs, backend_name, expm_batch
from .montecarlo import (
    DEFAULT_NSUB,
    Segment,
    SimOptions,
    TrajectorySample,
    check_cost_representation,
    check_game_values,
    check_martingale_drift,
    check_stationarity,
    check_value_function,
    estimate_cost,
    simulate_closed_loop,
    trajectory_on_grid,
    verify_equilibrium_mc,
)

__all__ = [
    "ChainPath",
    "DEFAULT_NSUB",
    "Segment",
    "SimOptions",
    "TrajectorySample",
    "accumulate_costs",
    "backend_name",
    "check_cost_representation",
    "check_game_values",
    "check_martingale_drift",
    "check_stationarity",
    "check_value_function",
    "estimate_cost",
    "expm_batch",
    "path_rng",
    "sample_chain",
    "sample_chain_batch",
    "simulate_closed_loop",
    "trajectory_on_grid",
    "verify_equilibrium_mc",
]
