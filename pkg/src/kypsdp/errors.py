"""Exception hierarchy shared by the solver modules."""


class KypError(Exception):
    """Base class for all solver errors."""


class DimensionError(KypError, ValueError):
    """Inconsistent matrix or vector dimensions."""


class OutOfDomain(KypError):
    """A barrier argument left the interior of the feasible set."""


class NotInDomain(OutOfDomain):
    """The Riccati equation has no (anti-)stabilizing solution at this point.

    Raised when ``R`` is not negative definite or the Hamiltonian has
    eigenvalues on (or numerically near) the imaginary axis.
    """


class SingularPencil(KypError):
    """Lyapunov operator is singular: two eigenvalues satisfy mu_i + conj(mu_j) ~ 0."""


class IllConditioned(KypError):
    """The invariant-subspace basis block X1 is too ill-conditioned to invert."""


class NearSingularY(KypError):
    """The gap matrix obtained from the Lyapunov shortcut is numerically singular."""


class LineSearchFailed(KypError):
    """Backtracking exhausted its step budget without an acceptable point."""


class NoFeasiblePoint(KypError):
    """A grid search found no feasible point."""
