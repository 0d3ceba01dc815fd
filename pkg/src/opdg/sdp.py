"""A small dense modeling layer and solver front end for LMI problems.

Problems are linear objectives over scalar, symmetric-matrix and
diagonal-matrix variables, subject to linear equalities, affine PSD
block constraints and one-sided scalar margins (strict inequalities
realized as eps-thresholds).  Symmetric matrix variables are
parameterized by their upper triangle, so a d x d variable contributes
d(d+1)/2 unknowns.

Solving is delegated to cvxopt's cone LP solver (a primal-dual
interior-point method with Nesterov-Todd scaling over dense PSD
blocks), after a rank/consistency preprocessing step on the equality
rows: redundant rows are compressed away by an SVD and inconsistent
systems are reported as infeasible without invoking the cone solver.
The solver is deterministic; identical problems produce identical
output.

``check_solution`` re-substitutes a solution into every constraint
independently of the solver's own residual bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import cvxopt
import cvxopt.solvers

SDP_TOL = 1e-8
EPS_STRICT = 1e-6
MAX_ITERS = 200
_RANK_TOL = 1e-12


@dataclass(frozen=True)
class VarSpec:
    name: str
    kind: str          # "scalar" | "symmetric" | "diagonal"
    dim: int
    lower: float | None = None

    @property
    def size(self):
        if self.kind == "scalar":
            return 1
        if self.kind == "symmetric":
            return self.dim * (self.dim + 1) // 2
        if self.kind == "diagonal":
            return self.dim
        raise ValueError(f"unknown variable kind {self.kind!r}")


class MatExpr:
    """Affine matrix expression: const + sum_q z_q coeff[q]."""

    __array_priority__ = 100.0  # keep numpy from hijacking __rmatmul__

    def __init__(self, const, coeff):
        self.const = np.asarray(const, dtype=float)
        self.coeff = np.asarray(coeff, dtype=float)
        if self.coeff.shape[1:] != self.const.shape:
            raise ValueError("coefficient tensor does not match constant")

    @property
    def shape(self):
        return self.const.shape

    def __add__(self, other):
        other = _to_expr(other, self.shape, self.coeff.shape[0])
        return MatExpr(self.const + other.const, self.coeff + other.coeff)

    __radd__ = __add__

    def __neg__(self):
        return MatExpr(-self.const, -self.coeff)

    def __sub__(self, other):
        return self + (-_to_expr(other, self.shape, self.coeff.shape[0]))

    def __rsub__(self, other):
        return _to_expr(other, self.shape, self.coeff.shape[0]) + (-self)

    def __mul__(self, scalar):
        return MatExpr(self.const * scalar, self.coeff * scalar)

    __rmul__ = __mul__

    def __matmul__(self, M):
        M = np.asarray(M, dtype=float)
        return MatExpr(self.const @ M, self.coeff @ M)

    def __rmatmul__(self, M):
        M = np.asarray(M, dtype=float)
        return MatExpr(M @ self.const, np.einsum("rc,qcd->qrd", M, self.coeff))

    @property
    def T(self):
        return MatExpr(self.const.T, np.transpose(self.coeff, (0, 2, 1)))

    def sym(self):
        return 0.5 * (self + self.T)

    def trace(self):
        return MatExpr(np.array([[np.trace(self.const)]]),
                       np.trace(self.coeff, axis1=1, axis2=2).reshape(-1, 1, 1))

    def times_identity(self, d):
        """Promote a scalar expression s to the matrix expression s*I_d."""
        if self.shape != (1, 1):
            raise ValueError("times_identity needs a scalar expression")
        eye = np.eye(d)
        return MatExpr(self.const[0, 0] * eye,
                       self.coeff[:, 0, 0][:, None, None] * eye)

    def entry(self, r, c):
        return MatExpr(self.const[r:r + 1, c:c + 1],
                       self.coeff[:, r:r + 1, c:c + 1])

    def row_dot(self, r, x):
        """Scalar expression <row r of self, vector x>."""
        x = np.asarray(x, dtype=float)
        return MatExpr(np.array([[self.const[r] @ x]]),
                       (self.coeff[:, r, :] @ x).reshape(-1, 1, 1))


def _to_expr(value, shape, nz):
    if isinstance(value, MatExpr):
        return value
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        if shape != (1, 1):
            raise ValueError("cannot combine a bare scalar with a matrix "
                             "expression; wrap it in an array")
        arr = arr.reshape(1, 1)
    return MatExpr(arr, np.zeros((nz,) + arr.shape))


@dataclass
class SdpProblem:
    """Container for one LMI problem; see the module docstring."""

    vars: list = field(default_factory=list)
    objective: np.ndarray | None = None
    objective_offset: float = 0.0
    eqs: list = field(default_factory=list)       # (name, A, b)
    psd_blocks: list = field(default_factory=list)  # (name, d, F0, Fcoef)
    margins: list = field(default_factory=list)   # (name, a, const, threshold)

    # -- variable handling ---------------------------------------------

    def add_var(self, name, kind, dim=1, lower=None):
        if any(v.name == name for v in self.vars):
            raise ValueError(f"variable {name!r} already declared")
        self.vars.append(VarSpec(name, kind, dim, lower))

    @property
    def n_scalars(self):
        return sum(v.size for v in self.vars)

    def _offset(self, name):
        off = 0
        for v in self.vars:
            if v.name == name:
                return off, v
            off += v.size
        raise KeyError(f"variable {name!r} not declared")

    def var(self, name) -> MatExpr:
        """The declared variable as a matrix expression."""
        off, v = self._offset(name)
        nz = self.n_scalars
        d = v.dim
        if v.kind == "scalar":
            coeff = np.zeros((nz, 1, 1))
            coeff[off, 0, 0] = 1.0
            return MatExpr(np.zeros((1, 1)), coeff)
        coeff = np.zeros((nz, d, d))
        if v.kind == "diagonal":
            for k in range(d):
                coeff[off + k, k, k] = 1.0
        else:
            k = 0
            for r in range(d):
                for c in range(r, d):
                    coeff[off + k, r, c] = 1.0
                    coeff[off + k, c, r] = 1.0
                    k += 1
        return MatExpr(np.zeros((d, d)), coeff)

    def unpack(self, z, name):
        """Matrix/scalar value of a variable from the packed vector."""
        off, v = self._offset(name)
        if v.kind == "scalar":
            return float(z[off])
        d = v.dim
        if v.kind == "diagonal":
            return np.diag(z[off:off + d])
        M = np.zeros((d, d))
        k = 0
        for r in range(d):
            for c in range(r, d):
                M[r, c] = M[c, r] = z[off + k]
                k += 1
        return M

    # -- constraints and objective --------------------------------------

    def add_equality(self, name, expr: MatExpr):
        """Require expr == 0 entrywise."""
        rows = expr.coeff.reshape(expr.coeff.shape[0], -1).T
        rhs = -expr.const.ravel()
        self.eqs.append((name, rows.copy(), rhs.copy()))

    def add_psd(self, name, expr: MatExpr):
        """Require the (symmetric) expression to be PSD."""
        d = expr.shape[0]
        if expr.shape != (d, d):
            raise ValueError(f"{name}: PSD block must be square")
        scale = max(np.abs(expr.const).max(), 1.0)
        if np.abs(expr.const - expr.const.T).max() > 1e-10 * scale:
            raise ValueError(f"{name}: constant term is not symmetric")
        e = expr.sym()
        self.psd_blocks.append((name, d, e.const.copy(), e.coeff.copy()))

    def add_margin(self, name, expr: MatExpr, threshold=EPS_STRICT):
        """Require the scalar expression to be >= threshold."""
        if expr.shape != (1, 1):
            raise ValueError(f"{name}: margin must be scalar")
        self.margins.append((name, expr.coeff[:, 0, 0].copy(),
                             float(expr.const[0, 0]), float(threshold)))

    def minimize(self, expr: MatExpr):
        if expr.shape != (1, 1):
            raise ValueError("objective must be scalar")
        self.objective = expr.coeff[:, 0, 0].copy()
        self.objective_offset = float(expr.const[0, 0])

    def _lower_bound_rows(self):
        rows = []
        off = 0
        for v in self.vars:
            if v.lower is not None:
                for k in range(v.size):
                    a = np.zeros(self.n_scalars)
                    a[off + k] = 1.0
                    rows.append((f"{v.name}:lb[{k}]", a, 0.0, float(v.lower)))
            off += v.size
        return rows


@dataclass(frozen=True)
class SdpSolution:
    values: dict
    objective_value: float
    status: str                     # Optimal | Infeasible | MaxIterations
    kkt_residuals: dict
    infeasibility: float | None = None


def _reduce_equalities(problem):
    """Stack, deduplicate and consistency-check the equality rows.

    Returns (A, b, inconsistency): a full-row-rank system equivalent to
    the input, and the least-squares inconsistency of the original
    system (zero for consistent systems up to numerical noise).
    """
    nz = problem.n_scalars
    if not problem.eqs:
        return np.zeros((0, nz)), np.zeros(0), 0.0
    A = np.vstack([rows for _, rows, _ in problem.eqs])
    b = np.concatenate([rhs for _, _, rhs in problem.eqs])
    scale = max(np.abs(A).max(), np.abs(b).max(), 1.0)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(s > _RANK_TOL * max(s[0], 1.0))) if s.size else 0
    A_red = s[:rank, None] * Vt[:rank]
    b_red = U[:, :rank].T @ b
    # residual of b outside the row space
    resid = b - U[:, :rank] @ b_red
    inconsistency = float(np.linalg.norm(resid, np.inf) / scale)
    # normalize rows for conditioning
    norms = np.linalg.norm(A_red, axis=1)
    norms[norms == 0] = 1.0
    return A_red / norms[:, None], b_red / norms, inconsistency


def _assemble_cones(problem, slack=False):
    """Build cvxopt (G, h, dims) from margins, lower bounds, PSD blocks.

    With ``slack=True`` a trailing variable t relaxes every cone
    constraint, for phase-1 infeasibility measurement.
    """
    nz = problem.n_scalars
    ncols = nz + (1 if slack else 0)
    lin_rows = []
    lin_rhs = []
    for name, a, const, thr in list(problem.margins) + problem._lower_bound_rows():
        row = np.zeros(ncols)
        row[:nz] = -a
        if slack:
            row[nz] = -1.0
        lin_rows.append(row)
        lin_rhs.append(const - thr)
    Gs = []
    hs = []
    sdims = []
    for name, d, F0, Fc in problem.psd_blocks:
        block = np.zeros((d * d, ncols))
        block[:, :nz] = -Fc.reshape(Fc.shape[0], -1).T
        if slack:
            block[:, nz] = -np.eye(d).ravel()
        Gs.append(block)
        hs.append(F0.ravel())
        sdims.append(d)
    parts = []
    rhs = []
    if lin_rows:
        parts.append(np.array(lin_rows))
        rhs.append(np.array(lin_rhs))
    parts.extend(Gs)
    rhs.extend(hs)
    G = np.vstack(parts) if parts else np.zeros((0, ncols))
    h = np.concatenate(rhs) if rhs else np.zeros(0)
    dims = {"l": len(lin_rows), "q": [], "s": sdims}
    return G, h, dims


_SOLVER_OPTIONS = {
    "show_progress": False,
    "maxiters": MAX_ITERS,
    "abstol": 1e-9,
    "reltol": 1e-9,
    "feastol": 1e-9,
    "refinement": 2,
}


def _conelp(c, G, h, dims, A, b):
    return cvxopt.solvers.conelp(
        cvxopt.matrix(c), cvxopt.matrix(G), cvxopt.matrix(h), dims,
        cvxopt.matrix(A), cvxopt.matrix(b), options=dict(_SOLVER_OPTIONS))


def _infeasibility_measure(problem, A, b):
    """Phase-1: smallest uniform cone relaxation that admits a point."""
    nz = problem.n_scalars
    G, h, dims = _assemble_cones(problem, slack=True)
    c = np.zeros(nz + 1)
    c[nz] = 1.0
    A1 = np.hstack([A, np.zeros((A.shape[0], 1))])
    try:
        sol = _conelp(c, G, h, dims, A1, b)
    except (ValueError, ArithmeticError):
        return None
    if sol["status"] in ("optimal", "dual infeasible") and sol["x"] is not None:
        return max(float(sol["x"][nz]), 0.0)
    return None


def solve_sdp(problem: SdpProblem) -> SdpSolution:
    """Solve the problem; see the module docstring for the method.

    The returned status is ``Optimal``, ``Infeasible`` (with an
    infeasibility measure: the smallest uniform constraint relaxation
    admitting a feasible point) or ``MaxIterations`` (best iterate and
    its residuals are returned).
    """
    nz = problem.n_scalars
    if problem.objective is None:
        c = np.zeros(nz)
    else:
        c = problem.objective.astype(float)
    A, b, inconsistency = _reduce_equalities(problem)
    if inconsistency > SDP_TOL:
        return SdpSolution(values={}, objective_value=np.nan,
                           status="Infeasible",
                           kkt_residuals={"primal": np.inf, "dual": np.inf,
                                          "gap": np.inf},
                           infeasibility=inconsistency)
    G, h, dims = _assemble_cones(problem)
    if G.shape[0] == 0:
        raise ValueError("problem has no cone constraints")

    try:
        sol = _conelp(c, G, h, dims, A, b)
    except (ValueError, ArithmeticError) as exc:
        raise ValueError(f"cone solver rejected the problem: {exc}") from exc

    status = sol["status"]
    kkt = {
        "primal": float(sol.get("primal infeasibility") or np.nan),
        "dual": float(sol.get("dual infeasibility") or np.nan),
        "gap": float(sol.get("gap") or np.nan),
    }
    if status == "optimal":
        z = np.array(sol["x"]).ravel()
        values = {v.name: problem.unpack(z, v.name) for v in problem.vars}
        obj = float(c @ z) + problem.objective_offset
        return SdpSolution(values=values, objective_value=obj,
                           status="Optimal", kkt_residuals=kkt)
    if status == "primal infeasible":
        measure = _infeasibility_measure(problem, A, b)
        return SdpSolution(values={}, objective_value=np.nan,
                           status="Infeasible", kkt_residuals=kkt,
                           infeasibility=measure)
    # "unknown" or "dual infeasible": return the best iterate
    values = {}
    obj = np.nan
    if sol.get("x") is not None:
        z = np.array(sol["x"]).ravel()
        values = {v.name: problem.unpack(z, v.name) for v in problem.vars}
        obj = float(c @ z) + problem.objective_offset
    return SdpSolution(values=values, objective_value=obj,
                       status="MaxIterations", kkt_residuals=kkt)


def check_solution(problem: SdpProblem, solution: SdpSolution,
                   tol=SDP_TOL) -> dict:
    """Independent re-substitution of all constraints.

    Returns a report with the worst equality violation, the smallest
    PSD block eigenvalue and the worst margin shortfall, plus an ``ok``
    flag at tolerance ``tol``.  Deliberately does not reuse any solver
    residuals.
    """
    z = _pack(problem, solution.values)
    eq_viol = 0.0
    for name, rows, rhs in problem.eqs:
        if rows.size:
            eq_viol = max(eq_viol, np.abs(rows @ z - rhs).max())
    min_eig = np.inf
    for name, d, F0, Fc in problem.psd_blocks:
        S = F0 + np.tensordot(z, Fc, axes=(0, 0))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(S).min()))
    margin_short = 0.0
    for name, a, const, thr in (list(problem.margins)
                                + problem._lower_bound_rows()):
        margin_short = max(margin_short, thr - (a @ z + const))
    scale = max(np.abs(z).max(), 1.0)
    ok = (eq_viol <= tol * scale
          and min_eig >= -tol * scale
          and margin_short <= tol * scale)
    return {"ok": bool(ok), "eq_violation": float(eq_viol),
            "min_psd_eigenvalue": float(min_eig),
            "margin_shortfall": float(margin_short)}


def _pack(problem, values):
    z = np.zeros(problem.n_scalars)
    off = 0
    for v in problem.vars:
        val = values[v.name]
        if v.kind == "scalar":
            z[off] = float(val)
        elif v.kind == "diagonal":
            z[off:off + v.dim] = np.diag(np.atleast_2d(val))
        else:
            M = np.asarray(val)
            k = 0
            for r in range(v.dim):
                for c in range(r, v.dim):
                    z[off + k] = M[r, c]
                    k += 1
        off += v.size
    return z


def dump_problem(problem: SdpProblem) -> str:
    """Readable text form of a problem, for debugging.

    Layout: one ``var`` line per variable, the objective row vector,
    then each equality block, PSD block and margin with its packed
    coefficients.  Not a standard interchange format.
    """
    out = []
    for v in problem.vars:
        lb = f" lower={v.lower}" if v.lower is not None else ""
        out.append(f"var {v.name} {v.kind}({v.dim}){lb}")
    if problem.objective is not None:
        out.append("minimize " + np.array2string(problem.objective,
                                                 precision=6))
    for name, rows, rhs in problem.eqs:
        out.append(f"eq {name}: {rows.shape[0]} rows")
        out.append(np.array2string(np.column_stack([rows, rhs]),
                                   precision=6, threshold=10_000))
    for name, d, F0, Fc in problem.psd_blocks:
        out.append(f"psd {name}: dim {d}")
        out.append("const " + np.array2string(F0, precision=6))
        for q in range(Fc.shape[0]):
            if np.any(Fc[q]):
                out.append(f"z[{q}] " + np.array2string(Fc[q], precision=6))
    for name, a, const, thr in problem.margins:
        out.append(f"margin {name}: >= {thr}")
        out.append(np.array2string(np.append(a, const), precision=6))
    return "\n".join(out)
