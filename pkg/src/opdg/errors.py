"""Exception types shared across the toolkit."""


class OpdgError(Exception):
    """Base class for all toolkit errors."""


class NotStabilizable(OpdgError):
    """The pair (A, B) fails the PBH stabilizability test."""


class NoConvergence(OpdgError):
    """An iterative solver ran out of iterations.

    Carries the last residual and the iteration count so callers can
    report how far the iteration got.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SolverFailure(OpdgError):
    """The conic solver returned an unusable status."""


class InfeasibleTfo(OpdgError):
    """The trajectory-free identification has no feasible point.

    Not a proof that the game admits no ordinal potential: the
    parallelism constraint is sufficient, not necessary, so a game may
    still be an ordinal potential game when this is raised.  Callers
    are expected to fall back to the weakly trajectory-dependent
    method.  ``report`` carries the structural feasibility analysis
    and ``infeasibility`` the attained equality/cone violation.
    """

    def __init__(self, message, report=None, infeasibility=None):
        super().__init__(message)
        self.report = report
        self.infeasibility = infeasibility


class InfeasibleWtdo(OpdgError):
    """The weakly trajectory-dependent identification is infeasible."""

    def __init__(self, message, infeasibility=None):
        super().__init__(message)
        self.infeasibility = infeasibility


class AreFailure(OpdgError):
    """A candidate (Q, R) pair does not admit a stabilizing Riccati solution."""


class NoImprovement(OpdgError):
    """The direct-search optimizer stalled without a usable iterate."""


class Diverged(OpdgError):
    """Simulated state norm exceeded the divergence bound."""


class DegenerateChannel(UserWarning):
    """A trajectory channel is identically zero and was skipped."""
