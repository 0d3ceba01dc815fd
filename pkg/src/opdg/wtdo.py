"""Weakly trajectory-dependent identification.

When the trajectory-free constraints are infeasible, the parallelism
requirement is dropped and replaced by sign constraints at the zero
crossings of each player's gradient signal B_i'P_i x(t): at the two
samples bracketing each sign change, the candidate's signal
B_i'Pp x(t) must change sign the same way.  The gain-consistency
Riccati equality is softened into a PSD residual block whose trace is
minimized, so the objective value is exactly the remaining
trace-residual eta and eta = 0 recovers the trajectory-free gain
consistency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleWtdo, SolverFailure
from .game import LqGame, PotentialFunction, stack_input_matrix
from .riccati import NeSolution
from .sdp import EPS_STRICT, SdpProblem, check_solution, solve_sdp
from .simulate import Trajectory

CHATTER_TOL = 1e-7


@dataclass(frozen=True)
class CrossingPoint:
    """One sign change of a gradient-signal channel, with the two
    bracketing samples (one simulation step apart)."""

    player: int
    channel: int
    t_minus: float
    t_plus: float
    x_minus: np.ndarray
    x_plus: np.ndarray
    sign_plus: float


def extract_crossings(game: LqGame, ne: NeSolution,
                      traj: Trajectory) -> list:
    """All sign changes of the signals [B_i'P_i x(t)]_j on the grid.

    Crossings whose two bracketing magnitudes are both below
    CHATTER_TOL relative to the channel's peak are numerical chatter
    around an exact zero and are dropped.  Noisy trajectories are
    scanned as-is; the noise moves the crossing points and that is the
    intended effect in robustness studies.
    """
    out = []
    for i, (Bi, Pi) in enumerate(zip(game.dynamics.B, ne.P)):
        sig = traj.x @ (Bi.T @ Pi).T
        for j in range(sig.shape[1]):
            s = sig[:, j]
            floor = CHATTER_TOL * np.abs(s).max()
            idx = np.where(s[:-1] * s[1:] < 0)[0]
            for k in idx:
                if abs(s[k]) < floor and abs(s[k + 1]) < floor:
                    continue
                out.append(CrossingPoint(
                    player=i, channel=j,
                    t_minus=float(traj.t[k]), t_plus=float(traj.t[k + 1]),
                    x_minus=traj.x[k].copy(), x_plus=traj.x[k + 1].copy(),
                    sign_plus=1.0 if s[k + 1] > 0 else -1.0))
    return out


def build_wtdo_problem(game: LqGame, ne: NeSolution,
                       crossings: list) -> SdpProblem:
    dyn = game.dynamics
    n = dyn.n
    B = stack_input_matrix(dyn)
    m = B.shape[1]
    Kp = np.vstack(ne.K)

    prob = SdpProblem()
    prob.add_var("Pp", "symmetric", n)
    prob.add_var("Qp", "symmetric", n)
    prob.add_var("Rp", "symmetric", m)
    Pp = prob.var("Pp")
    Qp = prob.var("Qp")
    Rp = prob.var("Rp")

    prob.add_equality("gain", (B.T @ Pp) - (Rp @ Kp))
    resid = ((dyn.A.T @ Pp) + (Pp @ dyn.A) - (Pp @ (B @ Kp)) + Qp).sym()
    prob.add_psd("riccati_residual", resid)
    prob.add_psd("Pp_psd", Pp)
    prob.add_psd("Qp_psd", Qp)
    prob.add_psd("Rp_floor", Rp - np.eye(m))
    # two sign-orientation margins per crossing: the candidate's signal
    # must carry the original's old sign at the pre-crossing sample and
    # the new sign at the post-crossing sample, so its own crossing
    # falls inside the same one-step bracket
    for k, cp in enumerate(crossings):
        Bi = dyn.B[cp.player]
        sig = Bi.T @ Pp   # (p_i, n) expression
        prob.add_margin(f"cross{k}+",
                        cp.sign_plus * sig.row_dot(cp.channel, cp.x_plus))
        prob.add_margin(f"cross{k}-",
                        -cp.sign_plus * sig.row_dot(cp.channel, cp.x_minus))
    prob.minimize(resid.trace())
    return prob


def solve_wtdo(game: LqGame, ne: NeSolution,
               crossings: list) -> PotentialFunction:
    """Identify a potential cost from crossing points alone.

    An empty crossing list is valid: the solution is then determined
    by gain consistency, the PSD floors and the residual-trace
    minimization alone.
    """
    prob = build_wtdo_problem(game, ne, crossings)
    sol = solve_sdp(prob)
    if sol.status == "Infeasible":
        raise InfeasibleWtdo(
            "crossing sign constraints admit no feasible potential",
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
    return PotentialFunction(
        Qp=Qp, Rp=Rp, Pp=Pp, Kp=Kp, method_tag="WTDO",
        extras={"eta": sol.objective_value,
                "n_crossings": len(crossings),
                "check": check_solution(prob, sol)})
