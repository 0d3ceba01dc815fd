"""Trajectory-free identification of an ordinal potential cost.

Given the feedback Nash gains, the potential (Qp, Rp, Pp) is sought so
that the stacked gain is the optimal feedback of the potential cost
and every player's gradient signal row B_i'Pp is a positive rescaling
of the corresponding original row B_i'P_i.  The scaling matrices are
diagonal with strictly positive entries, which is what makes the sign
condition hold for every state, not only along sampled trajectories.
The condition-number bound alpha on blkdiag(Qp, Rp) is minimized to
pin the otherwise free overall scaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleTfo, SolverFailure
from .game import LqGame, PotentialFunction, stack_input_matrix
from .riccati import NeSolution
from .sdp import EPS_STRICT, SdpProblem, check_solution, solve_sdp

RANK_TOL = 1e-9


@dataclass(frozen=True)
class FeasibilityReport:
    """Structural necessary-condition analysis for the trajectory-free
    identification (stated for two players; the dimension count is
    extrapolated verbatim to other player counts).

    condition_a        : per player, columns of B_i linearly independent.
    condition_b_value  : (1 + n)/2 - sum_i p_i.
    condition_b        : condition_b_value > 0.
    consistency_ranks  : per player, (rank(I_n kron B_i'), rank of the
                         augmented system with the unit-scaling
                         right-hand side vec(B_i'P_i)).
    advisory           : verdict string; never blocks the solver.
    """

    condition_a: list
    condition_b_value: float
    condition_b: bool
    consistency_ranks: list
    advisory: str


def _rank(M, tol=RANK_TOL):
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def check_feasibility(game: LqGame, ne: NeSolution) -> FeasibilityReport:
    """Necessary-condition report; advisory only.

    The dimension count can be pessimistic: the diagonal scaling
    matrices add degrees of freedom the count ignores, so a failing
    condition_b does not preclude a feasible identification, and the
    solver is always attempted regardless of this report.
    """
    dyn = game.dynamics
    n = dyn.n
    cond_a = [_rank(Bi) == Bi.shape[1] for Bi in dyn.B]
    value = 0.5 * (1 + n) - sum(dyn.p)
    ranks = []
    for Bi, Pi in zip(dyn.B, ne.P):
        At = np.kron(np.eye(n), Bi.T)
        bt = (Bi.T @ Pi).reshape(-1, 1, order="F")
        ranks.append((_rank(At), _rank(np.hstack([At, bt]))))
    if not all(cond_a) or value <= 0:
        advisory = "likely-infeasible"
    else:
        advisory = "necessary-conditions-met"
    if dyn.n_players > 2:
        advisory += " (extrapolated beyond two players)"
    return FeasibilityReport(condition_a=cond_a,
                             condition_b_value=float(value),
                             condition_b=bool(value > 0),
                             consistency_ranks=ranks,
                             advisory=advisory)


def build_tfo_problem(game: LqGame, ne: NeSolution) -> SdpProblem:
    dyn = game.dynamics
    n = dyn.n
    B = stack_input_matrix(dyn)
    m = B.shape[1]
    Kp = np.vstack(ne.K)

    prob = SdpProblem()
    prob.add_var("Pp", "symmetric", n)
    prob.add_var("Qp", "symmetric", n)
    prob.add_var("Rp", "symmetric", m)
    for i, pi in enumerate(dyn.p):
        prob.add_var(f"omega{i}", "diagonal", pi, lower=EPS_STRICT)
    prob.add_var("alpha", "scalar")

    Pp = prob.var("Pp")
    Qp = prob.var("Qp")
    Rp = prob.var("Rp")
    alpha = prob.var("alpha")

    # gain-consistency equalities: the stacked Nash gain must be the
    # optimal feedback of (Qp, Rp)
    lyap = (dyn.A.T @ Pp) + (Pp @ dyn.A) - (Pp @ (B @ Kp)) + Qp
    prob.add_equality("riccati", lyap.sym())
    prob.add_equality("gain", (B.T @ Pp) - (Rp @ Kp))
    # channel-wise positive rescaling of the gradient rows
    for i, (Bi, Pi) in enumerate(zip(dyn.B, ne.P)):
        Vi = Bi.T @ Pi
        prob.add_equality(f"parallel{i}",
                          (prob.var(f"omega{i}") @ Vi) - (Bi.T @ Pp))
    # I <= blkdiag(Qp, Rp) <= alpha I, imposed block-wise
    prob.add_psd("Qp_floor", Qp - np.eye(n))
    prob.add_psd("Rp_floor", Rp - np.eye(m))
    prob.add_psd("Qp_cap", alpha.times_identity(n) - Qp)
    prob.add_psd("Rp_cap", alpha.times_identity(m) - Rp)
    prob.add_psd("Pp_psd", Pp)
    # alpha itself is linear: minimizing it minimizes alpha^2 as well
    # since the floor forces alpha >= 1
    prob.minimize(alpha)
    return prob


def solve_tfo(game: LqGame, ne: NeSolution) -> PotentialFunction:
    """Identify a potential cost without using any trajectory data.

    Raises InfeasibleTfo when the constraint system admits no point;
    the exception carries the FeasibilityReport and the attained
    infeasibility measure so callers can fall back to the weakly
    trajectory-dependent method.  Infeasibility here does not prove
    the game is not an ordinal potential game.
    """
    prob = build_tfo_problem(game, ne)
    sol = solve_sdp(prob)
    if sol.status == "Infeasible":
        raise InfeasibleTfo(
            "trajectory-free identification is infeasible for this game",
            report=check_feasibility(game, ne),
            infeasibility=sol.infeasibility)
    if sol.status != "Optimal":
        raise SolverFailure(
            f"cone solver stopped with status {sol.status}; "
            f"residuals {sol.kkt_residuals}")
    B = stack_input_matrix(game.dynamics)
    Qp = sol.values["Qp"]
    Rp = sol.values["Rp"]
    Pp = sol.values["Pp"]
    Kp = np.linalg.solve(Rp, B.T @ Pp)
    omega = [sol.values[f"omega{i}"] for i in range(game.n_players)]
    return PotentialFunction(
        Qp=Qp, Rp=Rp, Pp=Pp, Kp=Kp, method_tag="TFO",
        omega=omega, alpha=float(sol.values["alpha"]),
        extras={"objective": sol.objective_value,
                "check": check_solution(prob, sol)})
