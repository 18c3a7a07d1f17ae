"""Riccati solution pairs, their gap, and derivatives with respect to the multipliers.

For ``lam`` in the domain, ``P_plus`` (anti-stabilizing) and ``P_minus``
(stabilizing) both solve ``F(P, lam) = 0`` and ``Delta = P_plus - P_minus``
is positive definite. Derivatives of either branch solve Lyapunov equations
with the branch's closed loop ``A - B K``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .equations import (AXIS_TOL, X1_COND_MAX, LyapunovSolver, RiccatiSolution,
                        negdef_factor, solve_riccati)
from .errors import NearSingularY
from .model import KypProblem, symmetrize

Y_COND_MAX = 1e12
STRATEGIES = ("lyapunov_shortcut", "two_solves")


@dataclass(frozen=True, eq=False)
class RiccatiPair:
    lam: np.ndarray
    P_plus: np.ndarray
    P_minus: np.ndarray
    Delta: np.ndarray
    K_plus: np.ndarray
    K_minus: np.ndarray
    Q: np.ndarray
    S: np.ndarray
    R: np.ndarray
    N: np.ndarray
    riccati_solves: int = 0
    lyapunov_solves: int = 0


@dataclass(frozen=True, eq=False)
class FirstOrder:
    """First derivatives of both branches plus the gain derivatives."""

    dP_plus: list
    dP_minus: list
    dK_plus: list
    dK_minus: list
    solvers: tuple = field(default=(), repr=False)

    @property
    def lyapunov_solves(self) -> int:
        return 2 * len(self.dP_plus)


@dataclass(frozen=True, eq=False)
class DerivativeBundle:
    dP_plus: list
    dP_minus: list
    d2P_plus: list
    d2P_minus: list
    dK_plus: list
    dK_minus: list

    @property
    def p(self) -> int:
        return len(self.dP_plus)

    @property
    def dDelta(self) -> list:
        return [a - b for a, b in zip(self.dP_plus, self.dP_minus)]

    @property
    def d2Delta(self) -> list:
        return [[a - b for a, b in zip(ra, rb)] for ra, rb in zip(self.d2P_plus, self.d2P_minus)]

    @property
    def lyapunov_solves(self) -> int:
        p = self.p
        return 2 * p + p * (p + 1)


def _gain(B, S, P, cho):
    return -linalg.cho_solve(cho, (P @ B + S).T)


def delta_via_lyapunov(A, B, S, R, P1: RiccatiSolution, *, axis_tol: float = AXIS_TOL,
                       y_cond_max: float = Y_COND_MAX) -> np.ndarray:
    """Difference ``Y = P2 - P1`` to the other Riccati solution, from one Lyapunov solve.

    ``Z = Y^{-1}`` solves ``Z (A - B K1)' + (A - B K1) Z = B R^{-1} B'``. With
    ``P1`` the anti-stabilizing solution, ``Y = -Delta``; with ``P1`` the
    stabilizing one, ``Y = Delta``.

    Raises
    ------
    SingularPencil
        The closed loop of ``P1`` has eigenvalues near the imaginary axis.
    NearSingularY
        ``cond(Z) > y_cond_max``; the point is numerically on the domain boundary.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    cho = negdef_factor(np.asarray(R, dtype=float))
    G = -B @ linalg.cho_solve(cho, B.T)
    M = A - B @ P1.K
    Z = LyapunovSolver(M.T, axis_tol).solve(-symmetrize(G))
    return _invert_gap(Z, y_cond_max)


def _invert_gap(Z, y_cond_max):
    w, V = np.linalg.eigh(Z)
    amax = np.max(np.abs(w))
    amin = np.min(np.abs(w))
    if amin == 0.0 or amax / amin > y_cond_max:
        raise NearSingularY(f"cond(Y^-1) = {amax / max(amin, 1e-300):.3e} exceeds {y_cond_max:.1e}")
    return symmetrize((V / w) @ V.T)


def compute_pair(prob: KypProblem, lam, strategy: str = "lyapunov_shortcut", *,
                 axis_tol: float = AXIS_TOL, x1_cond_max: float = X1_COND_MAX,
                 y_cond_max: float = Y_COND_MAX, refine: bool | str = "auto") -> RiccatiPair:
    """Both Riccati solutions and their gap at ``lam``.

    ``two_solves`` runs the Hamiltonian Schur method for each branch.
    ``lyapunov_shortcut`` solves for ``P_plus`` only and obtains the gap from
    :func:`delta_via_lyapunov`. ``P_plus`` is kept as computed because the
    objective and the ``P_plus > 0`` barrier use it directly; the
    subtraction ``P_minus = P_plus - Delta`` absorbs any cancellation.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    Q, S, R, N = prob.evaluate(lam)
    A, B = prob.A, prob.B
    kw = dict(axis_tol=axis_tol, x1_cond_max=x1_cond_max, refine=refine)
    plus = solve_riccati(A, B, Q, S, R, "antistabilizing", **kw)
    if strategy == "two_solves":
        minus = solve_riccati(A, B, Q, S, R, "stabilizing", **kw)
        P_minus, K_minus = minus.P, minus.K
        Delta = symmetrize(plus.P - P_minus)
        counts = (2, int(plus.refined) + int(minus.refined))
    else:
        Delta = -delta_via_lyapunov(A, B, S, R, plus, axis_tol=axis_tol,
                                    y_cond_max=y_cond_max)
        P_minus = symmetrize(plus.P - Delta)
        K_minus = _gain(B, S, P_minus, negdef_factor(R))
        counts = (1, 1 + int(plus.refined))
    return RiccatiPair(lam=lam, P_plus=plus.P, P_minus=P_minus, Delta=Delta,
                       K_plus=plus.K, K_minus=K_minus, Q=Q, S=S, R=R, N=N,
                       riccati_solves=counts[0], lyapunov_solves=counts[1])


def _branch_first(prob, K, B, cho, solver):
    dP, dK = [], []
    X = np.vstack([np.eye(prob.n), -K])
    for i in range(prob.p):
        Qi, Si, Ri = prob.Q.coeff(i), prob.S.coeff(i), prob.R.coeff(i)
        W = np.block([[symmetrize(Qi), Si], [Si.T, symmetrize(Ri)]])
        dPi = solver.solve(symmetrize(X.T @ W @ X))
        # dK_i = R^{-1}(B' dP_i + S_i' - R_i K)
        dKi = -linalg.cho_solve(cho, B.T @ dPi + Si.T - Ri @ K)
        dP.append(dPi)
        dK.append(dKi)
    return dP, dK


def first_derivatives(prob: KypProblem, pair: RiccatiPair, *,
                      axis_tol: float = AXIS_TOL) -> FirstOrder:
    """``d P_pm / d lam_i`` for both branches, one Lyapunov solve each."""
    A, B = prob.A, prob.B
    cho = negdef_factor(pair.R)
    sp = LyapunovSolver(A - B @ pair.K_plus, axis_tol)
    sm = LyapunovSolver(A - B @ pair.K_minus, axis_tol)
    dPp, dKp = _branch_first(prob, pair.K_plus, B, cho, sp)
    dPm, dKm = _branch_first(prob, pair.K_minus, B, cho, sm)
    return FirstOrder(dPp, dPm, dKp, dKm, solvers=(sp, sm))


def _branch_second(R, dK, solver):
    p = len(dK)
    table = [[None] * p for _ in range(p)]
    for i in range(p):
        RdKi = R @ dK[i]
        for j in range(i, p):
            C = dK[j].T @ RdKi
            table[i][j] = solver.solve(-(C + C.T))
            table[j][i] = table[i][j]
    return table


def second_derivatives(prob: KypProblem, pair: RiccatiPair, firsts: FirstOrder, *,
                       axis_tol: float = AXIS_TOL) -> tuple[list, list]:
    """``d^2 P_pm / d lam_i d lam_j`` tables; only ``i <= j`` is solved, then mirrored."""
    if firsts.solvers:
        sp, sm = firsts.solvers
    else:
        sp = LyapunovSolver(prob.A - prob.B @ pair.K_plus, axis_tol)
        sm = LyapunovSolver(prob.A - prob.B @ pair.K_minus, axis_tol)
    return (_branch_second(pair.R, firsts.dK_plus, sp),
            _branch_second(pair.R, firsts.dK_minus, sm))


def derivatives(prob: KypProblem, pair: RiccatiPair, *, axis_tol: float = AXIS_TOL) -> DerivativeBundle:
    firsts = first_derivatives(prob, pair, axis_tol=axis_tol)
    d2p, d2m = second_derivatives(prob, pair, firsts, axis_tol=axis_tol)
    return DerivativeBundle(firsts.dP_plus, firsts.dP_minus, d2p, d2m,
                            firsts.dK_plus, firsts.dK_minus)
