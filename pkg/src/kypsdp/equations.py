"""Dense Lyapunov and algebraic Riccati solvers built on real Schur forms."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from .errors import IllConditioned, NotInDomain, SingularPencil
from .model import symmetrize

AXIS_TOL = 1e-8
# scaled residual above which "auto" refinement applies a Newton step
REFINE_TRIGGER = 1e-12
X1_COND_MAX = 1e12


def quasi_triangular_eigvals(T: np.ndarray) -> np.ndarray:
    """Eigenvalues read off the 1x1 and 2x2 diagonal blocks of a real Schur form."""
    n = T.shape[0]
    out = np.empty(n, dtype=complex)
    k = 0
    while k < n:
        if k + 1 < n and T[k + 1, k] != 0.0:
            a, b, c, d = T[k, k], T[k, k + 1], T[k + 1, k], T[k + 1, k + 1]
            mean = 0.5 * (a + d)
            disc = 0.25 * (a - d) ** 2 + b * c
            root = np.sqrt(complex(disc))
            out[k], out[k + 1] = mean + root, mean - root
            k += 2
        else:
            out[k] = T[k, k]
            k += 1
    return out


class LyapunovSolver:
    """Bartels-Stewart solver for ``M' X + X M + C = 0`` with a fixed ``M``.

    The real Schur form of ``M`` is computed once, so repeated right-hand
    sides (as needed for first and second Riccati derivatives) only pay for
    the triangular solve and two orthogonal transformations.

    Raises
    ------
    SingularPencil
        If two eigenvalues of ``M`` satisfy ``|mu_i + conj(mu_j)| <= axis_tol``,
        in which case the solution is not unique.
    """

    def __init__(self, M: np.ndarray, axis_tol: float = AXIS_TOL):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        self.n = M.shape[0]
        self.norm = float(np.linalg.norm(M, 1)) if self.n else 0.0
        self.T, self.U = linalg.schur(M, output="real")
        self.eigvals = quasi_triangular_eigvals(self.T)
        sums = np.abs(self.eigvals[:, None] + self.eigvals.conj()[None, :])
        tol = axis_tol * max(1.0, self.norm)
        if self.n and sums.min() <= tol:
            raise SingularPencil(
                f"Lyapunov operator singular: min |mu_i + conj(mu_j)| = {sums.min():.3e}")
        self.solves = 0

    def solve(self, C: np.ndarray) -> np.ndarray:
        U, T = self.U, self.T
        F = -(U.T @ C @ U)
        # T' Y + Y T = F
        Y, scale, info = lapack.dtrsyl(T, T, F, trana="T", tranb="N", isgn=1)
        if info < 0:
            raise ValueError(f"dtrsyl: illegal argument {-info}")
        if info == 1:
            raise SingularPencil("dtrsyl reported a near-singular Lyapunov operator")
        self.solves += 1
        return symmetrize(U @ (Y / scale) @ U.T)


def solve_lyapunov(M, C, axis_tol: float = AXIS_TOL) -> np.ndarray:
    """Solve ``M' X + X M + C = 0`` for symmetric ``X``."""
    return LyapunovSolver(M, axis_tol).solve(np.asarray(C, dtype=float))


def riccati_residual(A, B, Q, S, R, P) -> np.ndarray:
    """``F(P) = A'P + PA + Q - (PB + S) R^{-1} (PB + S)'``."""
    G = P @ B + S
    return symmetrize(A.T @ P + P @ A + Q - G @ np.linalg.solve(R, G.T))


def riccati_scale(A, B, Q, R, P) -> float:
    """Natural size of the Riccati residual, used to make tolerances relative."""
    Rinv_norm = np.linalg.norm(np.linalg.inv(R), 2) if R.size else 0.0
    return ((1.0 + np.linalg.norm(P)) *
            (np.linalg.norm(A) + np.linalg.norm(Q) + Rinv_norm * np.linalg.norm(B, 2) ** 2))


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    P: np.ndarray
    K: np.ndarray
    closed_loop_eigs: np.ndarray
    residual_norm: float
    mode: str
    refined: bool = False


def negdef_factor(R: np.ndarray):
    """Cholesky factor of ``-R``; raises :class:`NotInDomain` unless ``R < 0``."""
    try:
        return linalg.cho_factor(-R, lower=True)
    except linalg.LinAlgError:
        raise NotInDomain("R(lambda) is not negative definite") from None


def solve_riccati(A, B, Q, S, R, mode: str = "antistabilizing", *,
                  axis_tol: float = AXIS_TOL, x1_cond_max: float = X1_COND_MAX,
                  refine: bool | str = "auto") -> RiccatiSolution:
    """Solve ``A'P + PA + Q - (PB+S) R^{-1} (PB+S)' = 0`` with ``R < 0``.

    The 2n x 2n Hamiltonian is brought to ordered real Schur form; the
    leading invariant subspace ``[X1; X2]`` collects the eigenvalues in the
    open left (``mode="stabilizing"``) or right (``"antistabilizing"``)
    half-plane and ``P = X2 X1^{-1}``. The closed loop ``A - BK`` with
    ``K = R^{-1}(PB + S)'`` then has exactly those eigenvalues.

    Parameters
    ----------
    refine : bool or "auto"
        Apply one Newton correction step (a Lyapunov solve) to the Schur
        solution. ``"auto"`` does so only when the residual exceeds
        ``REFINE_TRIGGER`` times :func:`riccati_scale`. The corrected
        solution is kept only if its residual is smaller.

    Raises
    ------
    NotInDomain
        ``R`` is not negative definite, or a Hamiltonian eigenvalue lies
        within ``axis_tol * ||H||`` of the imaginary axis.
    IllConditioned
        The reciprocal condition estimate of ``X1`` is below ``1/x1_cond_max``.
    """
    if mode not in ("stabilizing", "antistabilizing"):
        raise ValueError(f"unknown mode {mode!r}")
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    Q = np.asarray(Q, dtype=float)
    S = np.asarray(S, dtype=float)
    R = np.asarray(R, dtype=float)
    n = A.shape[0]

    cho = negdef_factor(R)
    # R^{-1} X = -(-R)^{-1} X
    RinvSt = -linalg.cho_solve(cho, S.T)
    RinvBt = -linalg.cho_solve(cho, B.T)
    Abar = A - B @ RinvSt
    G = symmetrize(B @ RinvBt)
    Qbar = symmetrize(Q - S @ RinvSt)
    H = np.block([[Abar, -G], [-Qbar, -Abar.T]])

    tol = axis_tol * max(1.0, np.linalg.norm(H, 1))
    if mode == "stabilizing":
        def select(re, im):
            return re < 0.0
    else:
        def select(re, im):
            return re > 0.0
    try:
        T, Z, sdim = linalg.schur(H, output="real", sort=select)
    except linalg.LinAlgError as exc:
        raise NotInDomain(f"Hamiltonian reordering failed: {exc}") from None
    eigs = quasi_triangular_eigvals(T)
    if np.min(np.abs(eigs.real)) <= tol or sdim != n:
        raise NotInDomain(
            f"Hamiltonian has eigenvalues near the imaginary axis "
            f"(min |Re| = {np.min(np.abs(eigs.real)):.3e}, tol {tol:.3e})")

    X1, X2 = Z[:n, :n], Z[n:, :n]
    lu, piv, info = lapack.dgetrf(X1)
    if info > 0:
        raise IllConditioned("X1 is exactly singular")
    rcond, _ = lapack.dgecon(lu, np.linalg.norm(X1, 1), norm="1")
    if rcond * x1_cond_max < 1.0:
        raise IllConditioned(f"cond(X1) ~ {1.0 / max(rcond, 1e-300):.3e} exceeds {x1_cond_max:.1e}")
    # P X1 = X2  <=>  X1' P' = X2'
    P = symmetrize(linalg.lu_solve((lu, piv), X2.T, trans=1).T)

    K = -linalg.cho_solve(cho, (P @ B + S).T)
    cl_eigs = eigs[:n]
    F = riccati_residual(A, B, Q, S, R, P)
    resid = float(np.linalg.norm(F))
    if refine == "auto":
        refine = resid > REFINE_TRIGGER * riccati_scale(A, B, Q, R, P)
    refined = False
    if refine:
        try:
            P2 = symmetrize(P + solve_lyapunov(A - B @ K, F, axis_tol))
        except SingularPencil:
            P2 = None
        if P2 is not None:
            resid2 = float(np.linalg.norm(riccati_residual(A, B, Q, S, R, P2)))
            refined = True
            if resid2 < resid:
                P, resid = P2, resid2
                K = -linalg.cho_solve(cho, (P @ B + S).T)
    return RiccatiSolution(P=P, K=K, closed_loop_eigs=cl_eigs, residual_norm=resid, mode=mode,
                           refined=refined)
