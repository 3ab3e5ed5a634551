"""Infinite-horizon LQ control on Markov-modulated linear systems.

The package solves the coupled algebraic Riccati systems behind the
single-controller problem and the two-player closed-loop equilibrium,
handles exponentially decaying forcing terms through a regime-indexed
feedforward ansatz, and checks every solution against Monte Carlo
simulation of the switching dynamics.
"""

from .bsde import (
    EtaSolution,
    default_truncation_steps,
    jump_compensation_amplitudes,
    solve_linear_bsde_stationary,
    solve_linear_bsde_truncated,
    solve_lq_feedforward,
)
from .care import (
    CareSolution,
    ClosedLoopPolicy,
    assemble_closed_loop,
    care_operator,
    care_residual,
    membership_in_G,
    solve_care,
    value_function,
)
from .errors import (
    HorizonTooShort,
    MjlqError,
    NotConverged,
    SimulationError,
    SolverError,
    SynthesisFailed,
    ValidationError,
)
from .game import (
    GameEtaSolution,
    GamePolicy,
    GameSolution,
    assemble_game_closed_loop,
    game_residuals,
    game_value,
    solve_game,
    solve_game_feedforward,
)
from .linalg import (
    coupled_lyapunov_operator,
    coupled_lyapunov_solve,
    coupled_spectral_abscissa,
    smat,
    svec,
)
from .model import (
    DecayingSignal,
    GameDecayingSignals,
    Generator,
    MjlsGameProblem,
    MjlsLqProblem,
    load_problem,
    problem_from_dict,
    problem_to_dict,
    save_problem,
    stationary_distribution,
    validate_game_problem,
    validate_generator,
    validate_lq_problem,
)
from .sim import (
    ChainPath,
    SimOptions,
    TrajectorySample,
    check_cost_representation,
    check_game_values,
    check_martingale_drift,
    check_stationarity,
    check_value_function,
    estimate_cost,
    sample_chain,
    sample_chain_batch,
    simulate_closed_loop,
    trajectory_on_grid,
    verify_equilibrium_mc,
)
from .stability import (
    StabilityCertificate,
    check_condition_a,
    is_game_stabilizer,
    is_stabilizer,
    synthesize_joint_stabilizer,
    synthesize_stabilizer,
)

__version__ = "0.1.0"

__all__ = [
    "CareSolution",
    "ChainPath",
    "ClosedLoopPolicy",
    "DecayingSignal",
    "EtaSolution",
    "GameDecayingSignals",
    "GameEtaSolution",
    "GamePolicy",
    "GameSolution",
    "Generator",
    "HorizonTooShort",
    "MjlqError",
    "MjlsGameProblem",
    "MjlsLqProblem",
    "NotConverged",
    "SimOptions",
    "SimulationError",
    "SolverError",
    "StabilityCertificate",
    "SynthesisFailed",
    "TrajectorySample",
    "ValidationError",
    "assemble_closed_loop",
    "assemble_game_closed_loop",
    "care_operator",
    "care_residual",
    "check_condition_a",
    "check_cost_representation",
    "check_game_values",
    "check_martingale_drift",
    "check_stationarity",
    "check_value_function",
    "coupled_lyapunov_operator",
    "coupled_lyapunov_solve",
    "coupled_spectral_abscissa",
    "default_truncation_steps",
    "estimate_cost",
    "game_residuals",
    "game_value",
    "is_game_stabilizer",
    "is_stabilizer",
    "jump_compensation_amplitudes",
    "load_problem",
    "membership_in_G",
    "problem_from_dict",
    "problem_to_dict",
    "sample_chain",
    "sample_chain_batch",
    "save_problem",
    "simulate_closed_loop",
    "smat",
    "solve_care",
    "solve_game",
    "solve_game_feedforward",
    "solve_linear_bsde_stationary",
    "solve_linear_bsde_truncated",
    "solve_lq_feedforward",
    "stationary_distribution",
    "svec",
    "synthesize_joint_stabilizer",
    "synthesize_stabilizer",
    "trajectory_on_grid",
    "validate_game_problem",
    "validate_generator",
    "validate_lq_problem",
    "value_function",
]
