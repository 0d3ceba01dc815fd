"""Closed-loop simulation, measurement noise, and the trajectory error.

Simulation uses the classical fixed-step fourth-order Runge-Kutta
scheme.  For the LTI closed loop dx/dt = A_cl x one RK4 step equals
multiplication by the degree-4 Taylor polynomial of exp(h A_cl), so
the step map is precomputed once and applied per sample; results are
bit-identical to the textbook four-stage evaluation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateChannel, Diverged

DEFAULT_STEP = 1e-3
MAX_HORIZON = 20.0
DIVERGENCE_BOUND = 1e9


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled closed-loop run.

    t : (T+1,) time grid,  x : (T+1, n) states,  u : (T+1, m) stacked
    inputs in player order,  p : per-player input widths for slicing.
    """

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    p: tuple

    @property
    def step(self):
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0

    def u_player(self, i):
        off = sum(self.p[:i])
        return self.u[:, off:off + self.p[i]]


def rk4_step_matrix(A, h):
    """One-step RK4 transition matrix for dx/dt = A x."""
    n = A.shape[0]
    Ah = A * h
    M = np.eye(n) + Ah
    term = Ah
    for k in (2.0, 3.0, 4.0):
        term = term @ Ah / k
        M = M + term
    return M


def default_horizon(Acl):
    """8 decay constants of the slowest closed-loop mode, capped."""
    slowest = np.max(np.linalg.eigvals(Acl).real)
    if slowest >= 0:
        return MAX_HORIZON
    return min(MAX_HORIZON, 8.0 / abs(slowest))


def simulate_closed_loop(game, gains, horizon=None, step=DEFAULT_STEP):
    """Integrate dx/dt = (A - sum_i B_i K_i) x from the game's x0.

    Inputs are reconstructed exactly as u_i = -K_i x at every sample.
    Raises Diverged when the state norm passes ``DIVERGENCE_BOUND``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    dyn = game.dynamics
    Acl = dyn.A - sum(Bi @ Ki for Bi, Ki in zip(dyn.B, gains))
    if horizon is None:
        horizon = default_horizon(Acl)
    steps = max(1, int(round(horizon / step)))
    Phi = rk4_step_matrix(Acl, step)
    xs = np.empty((steps + 1, dyn.n))
    xs[0] = game.x0
    for k in range(steps):
        xs[k + 1] = Phi @ xs[k]
        if not np.all(np.isfinite(xs[k + 1])) or \
                np.linalg.norm(xs[k + 1]) > DIVERGENCE_BOUND:
            raise Diverged(
                f"state norm exceeded {DIVERGENCE_BOUND:g} "
                f"at t={step * (k + 1):.6g}")
    Kstack = np.vstack(gains)
    us = -(xs @ Kstack.T)
    t = step * np.arange(steps + 1)
    return Trajectory(t=t, x=xs, u=us, p=tuple(dyn.p))


def add_noise(traj: Trajectory, snr_db, seed) -> Trajectory:
    """Additive white Gaussian noise on the state channels.

    Per channel, the noise variance is the channel's mean square power
    divided by 10^(snr_db/10).  Inputs are left untouched.  A fixed
    seed gives bit-identical output; snr_db = inf is a no-op.
    """
    if math.isinf(snr_db):
        return traj
    rng = np.random.default_rng(seed)
    power = np.mean(traj.x ** 2, axis=0)
    sigma = np.sqrt(power / (10.0 ** (snr_db / 10.0)))
    noise = rng.standard_normal(traj.x.shape) * sigma
    return Trajectory(t=traj.t, x=traj.x + noise, u=traj.u, p=traj.p)


def trajectory_error(traj_p: Trajectory, traj_star: Trajectory) -> float:
    """Worst-channel sup-norm error between two runs on one grid.

    Both trajectories are normalized channel-wise by the max magnitude
    of the *first* argument (the potential-game run), so the measure is
    not symmetric in its arguments.  Channels whose normalizer is zero
    are reported via a DegenerateChannel warning and skipped.
    """
    if traj_p.x.shape != traj_star.x.shape or \
            not np.allclose(traj_p.t, traj_star.t, rtol=0, atol=0):
        raise ValueError("trajectories must share one time grid")
    worst = 0.0
    for i in range(traj_p.x.shape[1]):
        scale = np.abs(traj_p.x[:, i]).max()
        if scale == 0.0:
            warnings.warn(f"channel {i + 1} is identically zero; skipped",
                          DegenerateChannel)
            continue
        worst = max(worst, np.abs(
            traj_p.x[:, i] / scale - traj_star.x[:, i] / scale).max())
    return worst


def write_trajectory_csv(traj: Trajectory, path):
    """CSV with header t,x1..xn,u1..um at full double precision."""
    n = traj.x.shape[1]
    m = traj.u.shape[1]
    header = ",".join(["t"] + [f"x{i + 1}" for i in range(n)]
                      + [f"u{j + 1}" for j in range(m)])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for k in range(len(traj.t)):
            row = np.concatenate([[traj.t[k]], traj.x[k], traj.u[k]])
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_trajectory_csv(path, p=None) -> Trajectory:
    """Read a trajectory CSV written by ``write_trajectory_csv``."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    n = sum(1 for h in header if h.startswith("x"))
    m = sum(1 for h in header if h.startswith("u"))
    t = data[:, 0]
    x = data[:, 1:1 + n]
    u = data[:, 1 + n:1 + n + m]
    return Trajectory(t=t, x=x, u=u, p=tuple(p) if p is not None else (m,))
