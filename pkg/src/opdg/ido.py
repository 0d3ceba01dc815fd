"""Input-dependent identification baseline.

Minimizes the integrated squared input mismatch between the candidate
potential's optimal feedback and the original game's equilibrium
inputs along the equilibrium trajectory.  The potential's Riccati
equation is enforced exactly by solving it for every candidate; the
channel-wise sign condition is enforced with a hinge penalty at the
trajectory samples.  The search runs derivative-free over Cholesky
factors, which keeps every iterate positive definite without
projection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import AreFailure, NoConvergence, NoImprovement, NotStabilizable
from .game import LqGame, PotentialFunction, stack_input_matrix
from .riccati import NeSolution, solve_single_are
from .simulate import Trajectory

JITTER = 1e-9


@dataclass
class IdoConfig:
    max_evals: int = 6000
    penalty_weight: float = 1e3
    init: tuple | None = None          # (Qp0, Rp0); identity pair if None
    sample_grid: np.ndarray | None = None  # defaults to the trajectory grid

    def __post_init__(self):
        if self.max_evals < 1:
            raise ValueError("max_evals must be at least 1")
        if self.penalty_weight <= 0:
            raise ValueError("penalty_weight must be positive")


def _pack_chol(Q, R):
    Lq = np.linalg.cholesky(Q)
    Lr = np.linalg.cholesky(R)
    return np.concatenate([Lq[np.tril_indices(Q.shape[0])],
                           Lr[np.tril_indices(R.shape[0])]])


def _unpack_chol(z, n, m):
    kq = n * (n + 1) // 2
    Lq = np.zeros((n, n))
    Lq[np.tril_indices(n)] = z[:kq]
    Lr = np.zeros((m, m))
    Lr[np.tril_indices(m)] = z[kq:]
    Q = Lq @ Lq.T + JITTER * np.eye(n)
    R = Lr @ Lr.T + JITTER * np.eye(m)
    return Q, R


def input_error(game: LqGame, ne: NeSolution, candidate,
                traj: Trajectory, warm_gain=None) -> float:
    """Trapezoid approximation of int |u_p(t) - u(t)|^2 dt.

    u_p applies the candidate's Riccati feedback to the state samples
    stored in ``traj`` (the measured equilibrium states, possibly
    noisy); u is the recorded equilibrium input stored alongside them.
    On a noise-free equilibrium trajectory the two coincide exactly
    when the candidate's gain equals the stacked equilibrium gain.
    Raises AreFailure when the candidate admits no stabilizing Riccati
    solution.
    """
    Qc, Rc = candidate
    B = stack_input_matrix(game.dynamics)
    try:
        _, Kc = solve_single_are(game.dynamics.A, B, Qc, Rc, K0=warm_gain)
    except (NotStabilizable, NoConvergence) as exc:
        raise AreFailure(f"candidate rejected: {exc}") from exc
    du = -(traj.x @ Kc.T) - traj.u
    return float(np.trapezoid((du ** 2).sum(axis=1), traj.t))


def solve_ido(game: LqGame, ne: NeSolution, traj: Trajectory,
              cfg: IdoConfig = None) -> PotentialFunction:
    """Fit (Qp, Rp) by direct search on the input-mismatch objective.

    Runs Nelder-Mead over the stacked Cholesky entries, then restarts
    once from a perturbed copy of the best point.  Candidates without a
    stabilizing Riccati solution score +inf; NoImprovement is raised if
    every candidate was rejected that way.
    """
    cfg = cfg or IdoConfig()
    dyn = game.dynamics
    n = dyn.n
    B = stack_input_matrix(dyn)
    m = B.shape[1]
    if cfg.init is None:
        Q0, R0 = np.eye(n), np.eye(m)
    else:
        Q0, R0 = cfg.init
    if cfg.sample_grid is not None:
        idx = np.clip(np.searchsorted(traj.t, cfg.sample_grid),
                      0, len(traj.t) - 1)
        traj = Trajectory(t=traj.t[idx], x=traj.x[idx], u=traj.u[idx],
                          p=traj.p)

    grads = [traj.x @ (Bi.T @ Pi).T for Bi, Pi in zip(dyn.B, ne.P)]
    grad_scale = [np.maximum(np.abs(g).max(axis=0), 1e-30) for g in grads]

    best = {"z": None, "obj": np.inf, "parts": None, "warm": None,
            "evals": 0}
    try:
        unit = max(input_error(game, ne, (Q0, R0), traj), 1e-12)
    except AreFailure:
        unit = 1.0

    def objective(z):
        best["evals"] += 1
        Qc, Rc = _unpack_chol(z, n, m)
        try:
            Pc, Kc = solve_single_are(dyn.A, B, Qc, Rc, K0=best["warm"])
        except (NotStabilizable, NoConvergence):
            return 1e12
        du = -(traj.x @ Kc.T) - traj.u
        e_u = float(np.trapezoid((du ** 2).sum(axis=1), traj.t))
        hinge = 0.0
        for i, Bi in enumerate(dyn.B):
            gp = traj.x @ (Bi.T @ Pc).T
            scale = grad_scale[i] * np.maximum(np.abs(gp).max(axis=0), 1e-30)
            hinge += float(np.maximum(0.0, -(grads[i] * gp) / scale).sum())
        obj = e_u / unit + cfg.penalty_weight * hinge / traj.x.shape[0]
        if obj < best["obj"]:
            best.update(obj=obj, z=z.copy(), warm=Kc,
                        parts=(Qc, Rc, Pc, Kc, e_u, hinge))
        return obj

    z0 = _pack_chol(Q0, R0)
    budget = cfg.max_evals
    first = max(budget * 2 // 3, 1)
    minimize(objective, z0, method="Nelder-Mead",
             options={"maxfev": first, "xatol": 1e-10, "fatol": 1e-12,
                      "adaptive": True})
    if best["z"] is None:
        raise NoImprovement(
            "no candidate admitted a stabilizing Riccati solution")
    remaining = budget - best["evals"]
    if remaining > len(z0) + 1:
        rng = np.random.default_rng(0)
        z1 = best["z"] * (1.0 + 0.02 * rng.standard_normal(len(z0)))
        minimize(objective, z1, method="Nelder-Mead",
                 options={"maxfev": remaining, "xatol": 1e-10,
                          "fatol": 1e-12, "adaptive": True})

    Qc, Rc, Pc, Kc, e_u, hinge = best["parts"]
    return PotentialFunction(
        Qp=Qc, Rp=Rc, Pp=Pc, Kp=Kc, method_tag="IDO",
        extras={"e_u": float(e_u), "hinge": float(hinge),
                "evals": best["evals"], "objective": float(best["obj"])})
