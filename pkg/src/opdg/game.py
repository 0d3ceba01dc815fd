"""Domain data for N-player linear-quadratic differential games.

A game couples linear time-invariant dynamics

    dx/dt = A x + sum_i B_i u_i

with one infinite-horizon quadratic cost per player,

    J_i = 1/2 int_0^inf  x' Q_i x + sum_j u_j' R_ij u_j  dt.

Everything here is plain data with validation; solvers live in the
sibling modules.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

TOL_PSD = 1e-9
TOL_PD = 1e-9
TOL_EQ = 1e-6
SYM_TOL = 1e-10


def _as_matrix(M, name):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError(f"{name} must be a 2-d matrix, got shape {M.shape}")
    return M


@dataclass(frozen=True)
class LtiDynamics:
    """State matrix plus one input matrix per player.

    A  : (n, n) system matrix.
    B  : list of (n, p_i) input matrices, one per player.
    """

    A: np.ndarray
    B: list

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        if len(self.B) < 1:
            raise ValueError("at least one player input matrix is required")
        Bs = []
        for i, Bi in enumerate(self.B):
            Bi = _as_matrix(Bi, f"B[{i}]")
            if Bi.shape[0] != A.shape[0]:
                raise ValueError(
                    f"B[{i}] has {Bi.shape[0]} rows, expected {A.shape[0]}")
            if Bi.shape[1] < 1:
                raise ValueError(f"B[{i}] must have at least one column")
            Bs.append(Bi)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", Bs)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def p(self):
        return [Bi.shape[1] for Bi in self.B]

    @property
    def n_players(self):
        return len(self.B)


@dataclass(frozen=True)
class PlayerCost:
    """Quadratic cost data of one player.

    Q : (n, n) state penalty, symmetric PSD.
    R : list of (p_j, p_j) input penalties, own block positive definite,
        cross blocks PSD (all-zero cross blocks are valid).

    Matrices that are symmetric up to serialization noise (1e-10
    relative) are symmetrized on construction; anything worse is kept
    as-is for validate_game to flag.
    """

    Q: np.ndarray
    R: list

    def __post_init__(self):
        object.__setattr__(self, "Q",
                           _soft_symmetrize(_as_matrix(self.Q, "Q")))
        object.__setattr__(
            self, "R",
            [_soft_symmetrize(_as_matrix(Rj, "R")) for Rj in self.R])


def _soft_symmetrize(M):
    if M.shape[0] != M.shape[1] or not np.all(np.isfinite(M)):
        return M
    scale = max(np.abs(M).max(), 1.0)
    if np.abs(M - M.T).max() <= SYM_TOL * scale:
        return 0.5 * (M + M.T)
    return M


@dataclass(frozen=True)
class LqGame:
    """An N-player LQ differential game with an initial state."""

    dynamics: LtiDynamics
    costs: list
    x0: np.ndarray

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float).ravel()
        object.__setattr__(self, "x0", x0)

    @property
    def n_players(self):
        return self.dynamics.n_players

    @property
    def n(self):
        return self.dynamics.n

    @property
    def m(self):
        return sum(self.dynamics.p)


@dataclass(frozen=True)
class PotentialFunction:
    """An identified quadratic potential cost together with its gain.

    Kp satisfies Kp = Rp^-1 Bp' Pp for the stacked input matrix
    Bp = [B_1 ... B_N].  ``omega`` holds per-player diagonal channel
    scalings (trajectory-free results only); ``alpha`` the condition
    number bound on blkdiag(Qp, Rp) (trajectory-free results only).
    """

    Qp: np.ndarray
    Rp: np.ndarray
    Pp: np.ndarray
    Kp: np.ndarray
    method_tag: str
    omega: list | None = None
    alpha: float | None = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method_tag not in ("TFO", "WTDO", "IDO"):
            raise ValueError(f"unknown method tag {self.method_tag!r}")


def validate_game(game: LqGame) -> list:
    """Check every structural and definiteness invariant of a game.

    Returns a list of human-readable violation strings; an empty list
    means the game is well formed.  Never raises on finite input: all
    problems are reported as data.
    """
    out = []
    dyn = game.dynamics
    n = dyn.n
    N = dyn.n_players
    p = dyn.p

    if len(game.costs) != N:
        out.append(
            f"costs: expected {N} player cost sets, got {len(game.costs)}")
    if game.x0.shape != (n,):
        out.append(f"x0: expected length {n}, got {game.x0.shape[0]}")
    if not np.all(np.isfinite(dyn.A)):
        out.append("A: contains non-finite entries")
    for i, Bi in enumerate(dyn.B):
        if not np.all(np.isfinite(Bi)):
            out.append(f"B[{i}]: contains non-finite entries")

    for i, cost in enumerate(game.costs[:N]):
        Q = cost.Q
        if Q.shape != (n, n):
            out.append(f"Q[{i}]: expected shape ({n}, {n}), got {Q.shape}")
            continue
        sym = _check_symmetric(Q, f"Q[{i}]", out)
        if sym is not None:
            lmin = np.linalg.eigvalsh(sym).min()
            if lmin < -TOL_PSD * max(1.0, np.abs(sym).max()):
                out.append(
                    f"Q[{i}]: not positive semi-definite "
                    f"(min eigenvalue {lmin:.3g})")
        if len(cost.R) != N:
            out.append(
                f"R[{i}]: expected {N} blocks, got {len(cost.R)}")
            continue
        for j, Rij in enumerate(cost.R):
            pj = p[j]
            name = f"R[{i}][{j}]"
            if Rij.shape != (pj, pj):
                out.append(
                    f"{name}: expected shape ({pj}, {pj}), got {Rij.shape}")
                continue
            sym = _check_symmetric(Rij, name, out)
            if sym is None:
                continue
            lmin = np.linalg.eigvalsh(sym).min()
            scale = max(1.0, np.abs(sym).max())
            if i == j:
                if lmin < TOL_PD * scale:
                    out.append(
                        f"{name}: own-input penalty must be positive "
                        f"definite (min eigenvalue {lmin:.3g})")
            elif lmin < -TOL_PSD * scale:
                out.append(
                    f"{name}: cross penalty not positive semi-definite "
                    f"(min eigenvalue {lmin:.3g})")
    return out


def _check_symmetric(M, name, out):
    if not np.all(np.isfinite(M)):
        out.append(f"{name}: contains non-finite entries")
        return None
    scale = max(np.abs(M).max(), 1.0)
    if np.abs(M - M.T).max() > SYM_TOL * scale:
        out.append(f"{name}: not symmetric within {SYM_TOL}")
        return None
    return 0.5 * (M + M.T)


def stack_input_matrix(dyn: LtiDynamics) -> np.ndarray:
    """Column-concatenate the player input matrices, [B_1 ... B_N]."""
    return np.hstack(dyn.B)


def input_slices(dyn: LtiDynamics) -> list:
    """Column slice of each player's block inside the stacked matrix."""
    out = []
    off = 0
    for pi in dyn.p:
        out.append(slice(off, off + pi))
        off += pi
    return out


def own_input_blockdiag(game: LqGame) -> np.ndarray:
    """blkdiag(R_11, ..., R_NN) in player order."""
    m = game.m
    out = np.zeros((m, m))
    off = 0
    for i, cost in enumerate(game.costs):
        pi = game.dynamics.p[i]
        out[off:off + pi, off:off + pi] = cost.R[i]
        off += pi
    return out


# --- JSON game-definition files -------------------------------------------

def game_to_dict(game: LqGame) -> dict:
    return {
        "A": game.dynamics.A.tolist(),
        "B": [Bi.tolist() for Bi in game.dynamics.B],
        "players": [
            {"Q": c.Q.tolist(), "R": [Rj.tolist() for Rj in c.R]}
            for c in game.costs
        ],
        "x0": game.x0.tolist(),
    }


def game_from_dict(data: dict) -> LqGame:
    try:
        dyn = LtiDynamics(A=np.array(data["A"], dtype=float),
                          B=[np.array(Bi, dtype=float) for Bi in data["B"]])
        costs = [
            PlayerCost(Q=np.array(pl["Q"], dtype=float),
                       R=[np.array(Rj, dtype=float) for Rj in pl["R"]])
            for pl in data["players"]
        ]
        x0 = np.array(data["x0"], dtype=float)
    except KeyError as exc:
        raise ValueError(f"game definition is missing field {exc}") from exc
    return LqGame(dynamics=dyn, costs=costs, x0=x0)


def load_game(path) -> LqGame:
    """Read a game-definition JSON file."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(
                f"{path}: invalid JSON at line {exc.lineno}, "
                f"column {exc.colno}: {exc.msg}") from exc
    return game_from_dict(data)


def save_game(game: LqGame, path):
    with open(path, "w") as fh:
        json.dump(game_to_dict(game), fh, indent=2)
        fh.write("\n")
