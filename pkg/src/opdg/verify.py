"""Ordinal- and exact-potential verification along trajectories.

The feedback substitution turns each player's Hamiltonian input
gradient into B_i' P_i x(t) for the original game and B_i' Pp x(t) for
the candidate potential, so the ordinal condition reduces to a
channel-wise sign agreement (equivalently: a nonnegative Hadamard
product) between those two signal families.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import LqGame, PotentialFunction, stack_input_matrix
from .riccati import NeSolution, solve_coupled_are
from .simulate import Trajectory

SIGN_TOL_FACTOR = 1e-9


@dataclass(frozen=True)
class HamiltonianGradients:
    """Per player: sampled gradients of the original and potential costs.

    g_orig[i], g_pot[i] are (T+1, p_i) arrays of B_i'P_i x(t) and
    B_i'Pp x(t).
    """

    g_orig: list
    g_pot: list


@dataclass(frozen=True)
class OpdgReport:
    pass_rate: float
    worst_violation: float
    sign_tol: float
    n_samples: int
    crossings_orig: list     # per (player, channel): sample indices
    crossings_pot: list
    max_misalignment: float  # samples; inf when crossing counts disagree

    @property
    def ok(self):
        return self.pass_rate == 1.0


def hamiltonian_gradients(game: LqGame, ne: NeSolution,
                          pot: PotentialFunction,
                          traj: Trajectory) -> HamiltonianGradients:
    g_orig = []
    g_pot = []
    for Bi, Pi in zip(game.dynamics.B, ne.P):
        g_orig.append(traj.x @ (Bi.T @ Pi).T)
        g_pot.append(traj.x @ (Bi.T @ pot.Pp).T)
    return HamiltonianGradients(g_orig=g_orig, g_pot=g_pot)


def _sign_crossings(sig):
    s = np.sign(sig)
    return np.where(s[:-1] * s[1:] < 0)[0]


def verify_opdg(game: LqGame, ne: NeSolution, pot: PotentialFunction,
                traj: Trajectory) -> OpdgReport:
    """Check the channel-wise sign condition along a trajectory.

    Passes where g_orig * g_pot >= -sign_tol with
    sign_tol = 1e-9 * max|g_orig| * max|g_pot| (exact zeros occur at
    crossings).  Also reports the zero-crossing sample indices of both
    signal families and their maximum misalignment in samples; a
    crossing in one family with no counterpart in the other yields an
    infinite misalignment.
    """
    grads = hamiltonian_gradients(game, ne, pot, traj)
    total = 0
    passed = 0
    worst = 0.0
    cr_orig = []
    cr_pot = []
    misalign = 0.0
    scale_o = max(np.abs(g).max() for g in grads.g_orig)
    scale_p = max(np.abs(g).max() for g in grads.g_pot)
    tol = SIGN_TOL_FACTOR * scale_o * scale_p
    for i in range(game.n_players):
        go, gp = grads.g_orig[i], grads.g_pot[i]
        prod = go * gp
        passed += int((prod >= -tol).sum())
        total += prod.size
        worst = min(worst, float(prod.min()))
        for j in range(go.shape[1]):
            co = _sign_crossings(go[:, j])
            cp = _sign_crossings(gp[:, j])
            cr_orig.append(((i, j), co.tolist()))
            cr_pot.append(((i, j), cp.tolist()))
            for a in co:
                misalign = max(misalign, float(np.abs(cp - a).min())
                               if cp.size else np.inf)
            for a in cp:
                misalign = max(misalign, float(np.abs(co - a).min())
                               if co.size else np.inf)
    return OpdgReport(pass_rate=passed / total,
                      worst_violation=worst,
                      sign_tol=tol,
                      n_samples=traj.x.shape[0],
                      crossings_orig=cr_orig,
                      crossings_pot=cr_pot,
                      max_misalignment=misalign)


def check_exact_potential(game: LqGame, pot: PotentialFunction,
                          ne: NeSolution = None, tol=1e-8):
    """Exactness test: potential input gradients equal the players' own.

    For the LQ feedback class this reduces to Rp being
    blkdiag(R_11, ..., R_NN) and B_i'Pp = B_i'P_i for every player.
    Returns (is_exact, residual) where the residual is the largest
    deviation across both families of conditions.
    """
    if ne is None:
        ne = solve_coupled_are(game)
    B = stack_input_matrix(game.dynamics)
    resid = 0.0
    off = 0
    for i in range(game.n_players):
        pi = game.dynamics.p[i]
        block = pot.Rp[off:off + pi, :]
        expected = np.zeros_like(block)
        expected[:, off:off + pi] = game.costs[i].R[i]
        resid = max(resid, np.abs(block - expected).max())
        resid = max(resid, np.abs(
            game.dynamics.B[i].T @ (pot.Pp - ne.P[i])).max())
        off += pi
    scale = max(np.abs(pot.Rp).max(), np.abs(B).max() * np.abs(pot.Pp).max(),
                1.0)
    return bool(resid <= tol * scale), float(resid)
