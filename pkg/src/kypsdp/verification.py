"""Independent checks of solver output.

Every routine here recomputes its quantity by a route that does not share
code with the solver: dense block products for the matrix inequality,
complex frequency sweeps, finite differences, and SciPy's QZ-based Riccati
solver for the grid oracle.
"""
from __future__ import annotations

import math
from typing import NamedTuple, Optional

import numpy as np
from scipy import linalg

from .barrier import SolverConfig, _DOMAIN_ERRORS
from .calculus import compute_pair, derivatives
from .equations import AXIS_TOL, solve_lyapunov
from .errors import NoFeasiblePoint
from .model import KypProblem, symmetrize
from .synthesis import SynthesisSpec

FREQ_POINTS = 200
FREQ_RANGE = (1e-3, 1e3)
MAX_HALVINGS = 60


def _max_eig(X) -> float:
    return float(np.linalg.eigvalsh(symmetrize(X))[-1])


def kyp_matrix(prob: KypProblem, lam, P) -> np.ndarray:
    """``[A'P + PA + Q, PB + S; (PB + S)', R]`` at ``lam``."""
    Q, S, R, _ = prob.evaluate(lam)
    P = np.asarray(P, dtype=float)
    A, B = prob.A, prob.B
    top = np.hstack([A.T @ P + P @ A + Q, P @ B + S])
    bottom = np.hstack([(P @ B + S).T, R])
    return symmetrize(np.vstack([top, bottom]))


def check_kyp_lmi(prob: KypProblem, lam, P) -> float:
    """Negated largest eigenvalue of the KYP matrix; positive means strictly feasible."""
    return -_max_eig(kyp_matrix(prob, lam, P))


def default_omega_grid(points: int = FREQ_POINTS, lo: float = FREQ_RANGE[0],
                       hi: float = FREQ_RANGE[1]) -> np.ndarray:
    """``points`` log-spaced frequencies in ``[lo, hi]`` followed by ``inf``."""
    return np.append(np.logspace(math.log10(lo), math.log10(hi), points), np.inf)


class FrequencyCheck(NamedTuple):
    margin: float          # min over evaluated points of -max eig of the form
    worst_omega: float
    evaluated: int
    skipped: tuple         # frequencies too close to an eigenvalue of A


def frequency_form(prob: KypProblem, lam, omega: float) -> np.ndarray:
    """Hermitian form ``[G; I]^* [Q S; S' R] [G; I]`` with ``G = (i w I - A)^{-1} B``.

    At ``omega = inf`` this is ``R``.
    """
    Q, S, R, _ = prob.evaluate(lam)
    if np.isinf(omega):
        return R.astype(complex)
    n = prob.n
    G = np.linalg.solve(1j * omega * np.eye(n) - prob.A, prob.B)
    F = G.conj().T @ Q @ G + G.conj().T @ S + S.T @ G + R
    return 0.5 * (F + F.conj().T)


def check_frequency_domain(prob: KypProblem, lam, omega_grid=None, *,
                           axis_tol: float = AXIS_TOL) -> FrequencyCheck:
    """Worst negated largest eigenvalue of the frequency form over a grid.

    Grid points within ``axis_tol * max(1, |A|)`` of an eigenvalue of ``A``
    are skipped and reported.
    """
    grid = default_omega_grid() if omega_grid is None else np.asarray(omega_grid, dtype=float)
    eigA = np.linalg.eigvals(prob.A) if prob.n else np.zeros(0)
    tol = axis_tol * max(1.0, float(np.linalg.norm(prob.A, 2))) if prob.n else 0.0
    worst, worst_w, count, skipped = math.inf, math.nan, 0, []
    for w in grid:
        if np.isfinite(w) and eigA.size and np.min(np.abs(eigA - 1j * w)) <= tol:
            skipped.append(float(w))
            continue
        F = frequency_form(prob, lam, w)
        margin = -float(np.linalg.eigvalsh(F)[-1])
        count += 1
        if margin < worst:
            worst, worst_w = margin, float(w)
    return FrequencyCheck(worst, worst_w, count, tuple(skipped))


def search_frequency_violation(prob: KypProblem, lam, omega_grid=None, *,
                               refinements: int = 2, factor: int = 4,
                               axis_tol: float = AXIS_TOL) -> tuple[str, FrequencyCheck]:
    """Look for a frequency at which the form is not negative definite.

    Sampling can only confirm a violation. If the default grid shows none, it
    is refined ``factor`` times up to ``refinements`` times.

    Returns
    -------
    verdict : {"violated", "inconclusive"}
    check : FrequencyCheck
        Result on the last grid that was evaluated.
    """
    points = FREQ_POINTS if omega_grid is None else len(omega_grid) - 1
    grid = default_omega_grid() if omega_grid is None else omega_grid
    for k in range(refinements + 1):
        res = check_frequency_domain(prob, lam, grid, axis_tol=axis_tol)
        if res.margin <= 0.0:
            return "violated", res
        points *= factor
        grid = default_omega_grid(points)
    return "inconclusive", res


class EquivalenceWitness(NamedTuple):
    ok: bool
    eps: float
    P: Optional[np.ndarray]
    lmi_margin: float
    halvings: int


def equivalence_probe(prob: KypProblem, lam, config: SolverConfig | None = None, *,
                      max_halvings: int = MAX_HALVINGS) -> EquivalenceWitness:
    """Strictly feasible ``P = P_plus - eps H`` for the KYP inequality at ``lam``.

    ``H`` solves ``(A - B K_plus)' H + H (A - B K_plus) = I``; ``eps`` starts
    at 1 and is halved until the KYP margin and ``min eig P`` are positive.
    """
    config = config or SolverConfig()
    try:
        pair = compute_pair(prob, lam, **config.pair_kwargs())
    except _DOMAIN_ERRORS:
        return EquivalenceWitness(False, math.nan, None, -math.inf, 0)
    M = prob.A - prob.B @ pair.K_plus
    H = solve_lyapunov(M, -np.eye(prob.n), config.axis_tol)
    eps = 1.0
    margin = -math.inf
    for k in range(max_halvings + 1):
        P = pair.P_plus - eps * H
        margin = check_kyp_lmi(prob, lam, P)
        if margin > 0.0 and np.linalg.eigvalsh(P)[0] > 0.0:
            return EquivalenceWitness(True, eps, P, margin, k)
        eps *= 0.5
    return EquivalenceWitness(False, eps, None, margin, max_halvings)


class FDReport(NamedTuple):
    first_error: float
    second_error: float
    skipped: bool
    h: np.ndarray


def fd_check(prob: KypProblem, lam, h: float | None = None,
             config: SolverConfig | None = None) -> FDReport:
    """Central-difference check of the analytic Riccati derivatives.

    First derivatives of ``P_plus`` and ``P_minus`` are compared with central
    differences of the solutions, second derivatives with central
    differences of the first derivatives. Errors are normalized by
    ``1 + |P|_F`` and ``1 + max_i |dP_i|_F`` respectively. The default step is
    ``1e-5 (1 + |lam_i|)`` per coordinate.

    The analytic derivatives come from ``config.strategy``. The probe points
    always use two Schur solves, so the differences do not inherit the
    cancellation in ``P_minus = P_plus - Delta`` of the shortcut.

    If a probe point leaves the domain the check is skipped and flagged.
    """
    config = config or SolverConfig()
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    steps = (1e-5 * (1.0 + np.abs(lam)) if h is None else np.full(lam.shape, float(h)))
    kw = config.pair_kwargs()
    probe_kw = dict(kw, strategy="two_solves")
    pair = compute_pair(prob, lam, **kw)
    ref = derivatives(prob, pair, axis_tol=config.axis_tol)

    probes = {}
    try:
        for i in range(prob.p):
            for sgn in (1, -1):
                lt = lam.copy()
                lt[i] += sgn * steps[i]
                pp = compute_pair(prob, lt, **probe_kw)
                probes[i, sgn] = (pp, derivatives(prob, pp, axis_tol=config.axis_tol))
    except _DOMAIN_ERRORS:
        return FDReport(math.nan, math.nan, True, steps)

    e1 = e2 = 0.0
    scale1 = 1.0 + max(np.linalg.norm(pair.P_plus), np.linalg.norm(pair.P_minus))
    dnorm = max([np.linalg.norm(d) for d in ref.dP_plus + ref.dP_minus], default=0.0)
    scale2 = 1.0 + dnorm
    for i in range(prob.p):
        (pp, bp), (pm, bm) = probes[i, 1], probes[i, -1]
        two_h = 2.0 * steps[i]
        e1 = max(e1,
                 np.linalg.norm((pp.P_plus - pm.P_plus) / two_h - ref.dP_plus[i]) / scale1,
                 np.linalg.norm((pp.P_minus - pm.P_minus) / two_h - ref.dP_minus[i]) / scale1)
        for j in range(prob.p):
            e2 = max(e2,
                     np.linalg.norm((bp.dP_plus[j] - bm.dP_plus[j]) / two_h
                                    - ref.d2P_plus[i][j]) / scale2,
                     np.linalg.norm((bp.dP_minus[j] - bm.dP_minus[j]) / two_h
                                    - ref.d2P_minus[i][j]) / scale2)
    return FDReport(float(e1), float(e2), False, steps)


def scipy_riccati_pair(prob: KypProblem, lam):
    """``(P_plus, P_minus)`` from SciPy's generalized-eigenvalue Riccati solver.

    ``P_minus`` is the stabilizing solution of the original data. ``P_plus``
    is the stabilizing solution of the data with ``A, B, Q, S, R`` negated,
    which is the anti-stabilizing solution of the original equation.

    Raises
    ------
    numpy.linalg.LinAlgError
        Either solution does not exist numerically.
    """
    Q, S, R, _ = prob.evaluate(lam)
    A, B = prob.A, prob.B
    Pm = linalg.solve_continuous_are(A, B, Q, R, s=S)
    Pp = linalg.solve_continuous_are(-A, -B, -Q, -R, s=-S)
    return symmetrize(Pp), symmetrize(Pm)


def _oracle_value(prob: KypProblem, lam: float, route: str, config: SolverConfig) -> float:
    """Objective at a scalar ``lam``, or ``nan`` if the point is infeasible."""
    lv = np.array([lam])
    Q, S, R, N = prob.evaluate(lv)
    if N.size and np.linalg.eigvalsh(N)[0] <= 0.0:
        return math.nan
    if np.linalg.eigvalsh(-R)[0] <= 0.0:
        return math.nan
    try:
        if route == "scipy":
            Pp, Pm = scipy_riccati_pair(prob, lv)
        else:
            pair = compute_pair(prob, lv, strategy="two_solves", axis_tol=config.axis_tol,
                                x1_cond_max=config.x1_cond_max)
            Pp, Pm = pair.P_plus, pair.P_minus
    except (np.linalg.LinAlgError, ValueError) + _DOMAIN_ERRORS:
        return math.nan
    if not np.all(np.isfinite(Pp)) or not np.all(np.isfinite(Pm)):
        return math.nan
    if np.linalg.eigvalsh(Pp)[0] <= 0.0 or np.linalg.eigvalsh(symmetrize(Pp - Pm))[0] <= 0.0:
        return math.nan
    return prob.objective(lv, Pp)


def grid_search_oracle(prob: KypProblem, lo: float, hi: float, steps: int, *,
                       route: str = "scipy", config: SolverConfig | None = None):
    """Best feasible objective on a uniform grid over ``[lo, hi]`` (``p = 1`` only).

    The grid is refined once, with ten times finer spacing, between the
    neighbours of the best point.

    Parameters
    ----------
    route : {"scipy", "schur"}
        ``"scipy"`` evaluates ``P_plus`` with SciPy's QZ Riccati solver,
        ``"schur"`` with two Hamiltonian Schur solves.

    Returns
    -------
    lam : float
    value : float

    Raises
    ------
    NoFeasiblePoint
        No grid point is feasible.
    """
    if prob.p != 1:
        raise ValueError("grid search needs exactly one multiplier")
    if route not in ("scipy", "schur"):
        raise ValueError(f"unknown route {route!r}")
    config = config or SolverConfig()

    def best_of(grid):
        vals = np.array([_oracle_value(prob, float(x), route, config) for x in grid])
        if np.all(np.isnan(vals)):
            return None
        k = int(np.nanargmin(vals))
        return k, float(grid[k]), float(vals[k])

    grid = np.linspace(lo, hi, steps + 1)
    first = best_of(grid)
    if first is None:
        raise NoFeasiblePoint(f"no feasible grid point in [{lo}, {hi}]")
    k, lam_best, val_best = first
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, steps)]
    fine = np.linspace(a, b, 10 * int(round((b - a) / (grid[1] - grid[0]))) + 1)
    second = best_of(fine)
    if second is not None and second[2] < val_best:
        lam_best, val_best = second[1], second[2]
    return lam_best, val_best


def _elimination_factor(spec: SynthesisSpec) -> np.ndarray:
    """Dense ``L`` with row blocks ``[0,-I,0]; [B1',0,D1']; [0,0,-I]; [B2',0,D2']``."""
    pl = spec.plant
    n, m, l, d = pl.n, pl.m, pl.l, pl.d
    rows = [
        np.hstack([np.zeros((n, n)), -np.eye(n), np.zeros((n, l))]),
        np.hstack([pl.B1.T, np.zeros((m, n)), pl.D1.T]),
        np.hstack([np.zeros((l, n)), np.zeros((l, n)), -np.eye(l)]),
        np.hstack([pl.B2.T, np.zeros((d, n)), pl.D2.T]),
    ]
    return np.vstack(rows)


def dense_multiplier_block(spec: SynthesisSpec, lam) -> np.ndarray:
    """``-L' D(lam) L`` with ``D = blockdiag(Qcal^{-1}, Rcal^{-1}, M(lam))`` as one dense product."""
    L = _elimination_factor(spec)
    D = linalg.block_diag(np.linalg.inv(spec.Qcal), np.linalg.inv(spec.Rcal), spec.Mfam(lam))
    return symmetrize(-L.T @ D @ L)


def synthesis_lmi(spec: SynthesisSpec, lam, P) -> np.ndarray:
    """Eliminated synthesis inequality in ``P``, built densely from the plant data.

    Outer factor ``[Acal' B; I 0]`` with ``B = [I, Ccal']`` applied to
    ``[[0, P], [P, 0]]``, plus ``-L' D(lam) L``.
    """
    pl = spec.plant
    n = pl.n
    P = np.asarray(P, dtype=float)
    Bs = np.hstack([np.eye(n), pl.Ccal.T])
    k = Bs.shape[1]
    T = np.vstack([np.hstack([pl.Acal.T, Bs]), np.hstack([np.eye(n), np.zeros((n, k))])])
    W = np.block([[np.zeros((n, n)), P], [P, np.zeros((n, n))]])
    return symmetrize(T.T @ W @ T + dense_multiplier_block(spec, lam))


def check_synthesis_lmi(spec: SynthesisSpec, lam, P) -> float:
    """Negated largest eigenvalue of :func:`synthesis_lmi`."""
    return -_max_eig(synthesis_lmi(spec, lam, P))
