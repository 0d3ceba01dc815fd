"""Ordinal potential differential game toolkit.

Feedback Nash equilibria of N-player linear-quadratic differential
games via coupled Riccati equations, plus three identification methods
that recover a single quadratic potential cost reproducing the
equilibrium: trajectory-free (TFO), weakly trajectory-dependent (WTDO)
and the input-dependent baseline (IDO).  Simulation, verification and
noise-robustness tooling round out the library; the ``opdg`` CLI
drives the same functions end to end.
"""

from .errors import (AreFailure, DegenerateChannel, Diverged, InfeasibleTfo,
                     InfeasibleWtdo, NoConvergence, NoImprovement,
                     NotStabilizable, OpdgError, SolverFailure)
from .game import (LqGame, LtiDynamics, PlayerCost, PotentialFunction,
                   load_game, save_game, stack_input_matrix, validate_game)
from .riccati import NeSolution, solve_coupled_are, solve_single_are
from .sdp import SdpProblem, SdpSolution, check_solution, solve_sdp
from .tfo import FeasibilityReport, check_feasibility, solve_tfo
from .wtdo import CrossingPoint, extract_crossings, solve_wtdo
from .ido import IdoConfig, input_error, solve_ido
from .simulate import (Trajectory, add_noise, simulate_closed_loop,
                       trajectory_error, write_trajectory_csv)
from .verify import (HamiltonianGradients, OpdgReport, check_exact_potential,
                     hamiltonian_gradients, verify_opdg)
from .datafiles import builtin_game, reference_values

__version__ = "0.1.0"

__all__ = [
    "AreFailure", "CrossingPoint", "DegenerateChannel", "Diverged",
    "FeasibilityReport", "HamiltonianGradients", "IdoConfig",
    "InfeasibleTfo", "InfeasibleWtdo", "LqGame", "LtiDynamics",
    "NeSolution", "NoConvergence", "NoImprovement", "NotStabilizable",
    "OpdgError", "OpdgReport", "PlayerCost", "PotentialFunction",
    "SdpProblem", "SdpSolution", "SolverFailure", "Trajectory",
    "add_noise", "builtin_game", "check_exact_potential",
    "check_feasibility", "check_solution", "extract_crossings",
    "hamiltonian_gradients", "input_error", "load_game",
    "reference_values", "save_game", "simulate_closed_loop",
    "solve_coupled_are", "solve_ido", "solve_sdp", "solve_single_are",
    "solve_tfo", "solve_wtdo", "stack_input_matrix", "trajectory_error",
    "validate_game", "verify_opdg", "write_trajectory_csv",
]
