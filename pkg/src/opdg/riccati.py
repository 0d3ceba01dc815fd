"""Algebraic Riccati solvers: single-agent and coupled feedback Nash.

The single-agent equation

    A'P + PA - P B R^-1 B' P + Q = 0

is solved by Newton-Kleinman iteration: each step solves one Lyapunov
equation by the dense Kronecker method, which is exact to working
precision at the n <= 10 sizes this toolkit targets.  The coupled
system for a feedback Nash equilibrium,

    0 = A'P_i + P_i A + Q_i - P_i S_i P_i
        - sum_{j != i} (P_i S_j P_j + P_j S_j P_i)
        + sum_{j != i} P_j S_ij P_j,
    S_j  = B_j R_jj^-1 B_j',
    S_ij = B_j R_jj^-1 R_ij R_jj^-1 B_j',

is solved by damped best-response sweeps: holding the other players'
gains fixed, player i's equation is a single-agent Riccati equation in
the residual closed loop, so each sweep is N inner Newton-Kleinman
solves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, NotStabilizable
from .game import LqGame

RICCATI_TOL = 1e-9
MAX_SWEEPS = 500
MAX_NEWTON = 100
HURWITZ_TOL = 1e-8


@dataclass(frozen=True)
class NeSolution:
    """Feedback Nash equilibrium: value matrices, gains, certificate."""

    P: list
    K: list
    residual: float
    iterations: int

    def closed_loop(self, dynamics):
        Acl = dynamics.A.copy()
        for Bi, Ki in zip(dynamics.B, self.K):
            Acl -= Bi @ Ki
        return Acl


def lyap_solve(F, W):
    """Solve F'X + XF + W = 0 for symmetric X (dense Kronecker method).

    Unique solvability requires lambda_i(F) + lambda_j(F) != 0, which
    holds whenever F is Hurwitz.
    """
    F = np.asarray(F, dtype=float)
    W = np.asarray(W, dtype=float)
    n = F.shape[0]
    lhs = np.kron(np.eye(n), F.T) + np.kron(F.T, np.eye(n))
    x = np.linalg.solve(lhs, -W.reshape(n * n, order="F"))
    X = x.reshape((n, n), order="F")
    return 0.5 * (X + X.T)


def is_hurwitz(M, tol=HURWITZ_TOL):
    return np.max(np.linalg.eigvals(M).real) < -tol


def check_stabilizable(A, B, rank_tol=1e-9):
    """PBH test: rank [A - lambda I, B] = n on every unstable eigenvalue."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if lam.real < -HURWITZ_TOL:
            continue
        M = np.hstack([A - lam * np.eye(n), B])
        sv = np.linalg.svd(M, compute_uv=False)
        if sv[-1] <= rank_tol * sv[0]:
            return False
    return True


def _bass_stabilizing_gain(A, B):
    """Stabilizing gain from the eigenvalue-shifted Lyapunov construction.

    With beta > max |Re lambda(A)| the solution Z of
    (A + beta I) Z + Z (A + beta I)' = 2 B B' is PSD and
    K = B' pinv(Z) renders A - B K Hurwitz for stabilizable (A, B).
    """
    beta = np.linalg.norm(A, "fro") + 1.0
    M = A + beta * np.eye(A.shape[0])
    Z = lyap_solve(M.T, -2.0 * B @ B.T)
    K = B.T @ np.linalg.pinv(Z, hermitian=True, rcond=1e-12)
    return K


def are_residual(A, B, Q, R, P):
    """Frobenius norm of the single-agent Riccati left-hand side."""
    S = B @ np.linalg.solve(R, B.T)
    return np.linalg.norm(A.T @ P + P @ A - P @ S @ P + Q, "fro")


def solve_single_are(A, B, Q, R, K0=None):
    """Stabilizing solution of A'P + PA - P B R^-1 B' P + Q = 0.

    Parameters
    ----------
    A, B, Q, R : arrays with Q PSD and R PD.
    K0 : optional warm-start gain; used when A - B K0 is Hurwitz.

    Returns
    -------
    (P, K) with P symmetric PSD, K = R^-1 B' P and A - B K Hurwitz.

    Raises
    ------
    NotStabilizable
        If (A, B) fails the PBH test or no stabilizing start exists.
    NoConvergence
        If the Newton iteration does not reach the residual tolerance.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    Q = 0.5 * (np.asarray(Q, dtype=float) + np.asarray(Q, dtype=float).T)
    R = 0.5 * (np.asarray(R, dtype=float) + np.asarray(R, dtype=float).T)
    if B.ndim == 1:
        B = B.reshape(-1, 1)

    if not check_stabilizable(A, B):
        raise NotStabilizable(
            f"(A, B) with shapes {A.shape}, {B.shape} is not stabilizable")

    if K0 is not None and is_hurwitz(A - B @ np.asarray(K0, dtype=float)):
        K = np.asarray(K0, dtype=float)
    elif is_hurwitz(A):
        K = np.zeros((B.shape[1], A.shape[0]))
    else:
        K = _bass_stabilizing_gain(A, B)
        if not is_hurwitz(A - B @ K):
            raise NotStabilizable(
                "could not construct an initial stabilizing gain")

    res = np.inf
    stalled = 0
    for it in range(MAX_NEWTON):
        Acl = A - B @ K
        W = Q + K.T @ R @ K
        P = lyap_solve(Acl, W)
        K = np.linalg.solve(R, B.T @ P)
        prev = res
        res = are_residual(A, B, Q, R, P)
        done = res < RICCATI_TOL
        if not done:
            # quadratic convergence normally ends well below the absolute
            # tolerance; a plateau means the roundoff floor of this
            # problem's scale was reached, so fall back to a
            # scale-relative test
            stalled = stalled + 1 if res > 0.5 * prev else 0
            if stalled >= 3:
                if res < RICCATI_TOL * max(1.0, np.linalg.norm(W, "fro")):
                    done = True
                else:
                    break
        if done:
            if not is_hurwitz(A - B @ K):
                raise NoConvergence(
                    "iteration converged to a non-stabilizing solution "
                    "(Q may lack detectability)",
                    residual=res, iterations=it + 1)
            return P, K
    raise NoConvergence(
        f"Newton iteration stalled at residual {res:.3e}",
        residual=res, iterations=it + 1)


def _coupled_terms(game):
    dyn = game.dynamics
    N = dyn.n_players
    S = [dyn.B[j] @ np.linalg.solve(game.costs[j].R[j], dyn.B[j].T)
         for j in range(N)]
    Scross = {}
    for i in range(N):
        for j in range(N):
            if i == j:
                continue
            Rjj = game.costs[j].R[j]
            inner = np.linalg.solve(Rjj, game.costs[i].R[j]) @ \
                np.linalg.solve(Rjj, dyn.B[j].T)
            Scross[i, j] = dyn.B[j] @ inner
    return S, Scross


def coupled_residual(game: LqGame, Ps) -> float:
    """Max over players of the Frobenius norm of the coupled-equation LHS."""
    dyn = game.dynamics
    N = dyn.n_players
    S, Scross = _coupled_terms(game)
    worst = 0.0
    for i in range(N):
        Pi = Ps[i]
        M = dyn.A.T @ Pi + Pi @ dyn.A + game.costs[i].Q - Pi @ S[i] @ Pi
        for j in range(N):
            if j == i:
                continue
            M -= Pi @ S[j] @ Ps[j] + Ps[j] @ S[j] @ Pi
            M += Ps[j] @ Scross[i, j] @ Ps[j]
        worst = max(worst, np.linalg.norm(M, "fro"))
    return worst


def _initial_gains(game):
    """Per-player solo LQR gains; joint stacked LQR split when the solo
    loop is not jointly stabilizing (players may only be stabilizable
    together)."""
    dyn = game.dynamics
    N = dyn.n_players
    Ks = []
    solo_ok = True
    for i in range(N):
        try:
            _, Ki = solve_single_are(dyn.A, dyn.B[i], game.costs[i].Q,
                                     game.costs[i].R[i])
            Ks.append(Ki)
        except (NotStabilizable, NoConvergence):
            solo_ok = False
            Ks.append(np.zeros((dyn.p[i], dyn.n)))
    Acl = dyn.A - sum(dyn.B[i] @ Ks[i] for i in range(N))
    if solo_ok and is_hurwitz(Acl):
        return Ks

    Bstack = np.hstack(dyn.B)
    if not check_stabilizable(dyn.A, Bstack):
        raise NotStabilizable(
            "the game is not jointly stabilizable through [B_1 ... B_N]")
    Rblk = np.zeros((Bstack.shape[1],) * 2)
    off = 0
    for i in range(N):
        pi = dyn.p[i]
        Rblk[off:off + pi, off:off + pi] = game.costs[i].R[i]
        off += pi
    Qmean = sum(c.Q for c in game.costs) / N
    _, Kj = solve_single_are(dyn.A, Bstack, Qmean, Rblk)
    Ks = []
    off = 0
    for i in range(N):
        pi = dyn.p[i]
        Ks.append(Kj[off:off + pi, :])
        off += pi
    return Ks


def solve_coupled_are(game: LqGame) -> NeSolution:
    """Feedback Nash equilibrium of a validated LQ differential game.

    Damped best-response sweeps over the players; each inner problem is
    a single-agent Riccati equation warm-started from the player's
    current gain.  Convergence is certified by re-substitution into the
    coupled equations.

    Raises
    ------
    NotStabilizable
        If no jointly stabilizing initial gain set exists.
    NoConvergence
        If the sweep residual does not reach ``RICCATI_TOL``; the
        exception carries the last residual and sweep count.
    """
    dyn = game.dynamics
    N = dyn.n_players
    Ks = _initial_gains(game)
    Ps = [np.zeros((dyn.n, dyn.n)) for _ in range(N)]
    prev_res = np.inf
    prev_Ks = None

    for sweep in range(1, MAX_SWEEPS + 1):
        for i in range(N):
            Aoth = dyn.A - sum(dyn.B[j] @ Ks[j] for j in range(N) if j != i)
            Qbar = game.costs[i].Q + sum(
                Ks[j].T @ game.costs[i].R[j] @ Ks[j]
                for j in range(N) if j != i)
            Pi, Ki = solve_single_are(Aoth, dyn.B[i], Qbar,
                                      game.costs[i].R[i], K0=Ks[i])
            Ps[i], Ks[i] = Pi, Ki
        res = coupled_residual(game, Ps)
        if res < RICCATI_TOL:
            Acl = dyn.A - sum(dyn.B[j] @ Ks[j] for j in range(N))
            if not is_hurwitz(Acl):
                raise NoConvergence(
                    "converged to a non-stabilizing fixed point",
                    residual=res, iterations=sweep)
            return NeSolution(P=[Pi.copy() for Pi in Ps],
                              K=[Ki.copy() for Ki in Ks],
                              residual=res, iterations=sweep)
        if res > prev_res and prev_Ks is not None:
            Ks = [0.5 * (Kp + Kn) for Kp, Kn in zip(prev_Ks, Ks)]
        prev_res = res
        prev_Ks = [Ki.copy() for Ki in Ks]

    raise NoConvergence(
        f"coupled Riccati sweeps stalled at residual {prev_res:.3e}",
        residual=prev_res, iterations=MAX_SWEEPS)
