"""Path-following barrier method over the multipliers ``lam``.

For a barrier weight ``t`` the method minimizes

    v_t(lam) = t (c' lam - tr Sigma P_plus) - log det N - log det P_plus
               - log det(-R) - log det Delta

with damped Newton steps, then multiplies ``t`` by ``t_factor``, ending
with a stage at exactly ``t_max``. The Lyapunov matrix of the KYP
inequality never appears as a variable; it is replaced by the
anti-stabilizing Riccati solution ``P_plus(lam)``.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import linalg

from .calculus import Y_COND_MAX, DerivativeBundle, RiccatiPair, compute_pair, derivatives
from .equations import AXIS_TOL, X1_COND_MAX
from .errors import (IllConditioned, LineSearchFailed, NearSingularY,
                     NotInDomain, OutOfDomain, SingularPencil)
from .model import AffineMatrixFamily, KypProblem, symmetrize

log = logging.getLogger(__name__)

# The auxiliary optimum can be tiny when the feasible set is thin, so the
# auxiliary path runs further than a regular solve.
PHASE1_T_MAX = 1e12
# Predicted decreases within NOISE_BAND resolutions of v are treated as
# noise-limited; line searches there stop after NOISE_PROBES trial points.
NOISE_BAND = 1e3
NOISE_PROBES = 10

_DOMAIN_ERRORS = (NotInDomain, OutOfDomain, NearSingularY, IllConditioned, SingularPencil)


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the barrier method.

    ``newton_tol`` bounds the Newton decrement that ends a t-stage.
    ``hessian_form="doubled"`` doubles the quadratic log-det terms of the
    Hessian (a positive definite over-estimate of the exact Hessian).
    """

    t0: Optional[float] = None
    t_max: float = 1e6
    t_factor: float = 10.0
    newton_tol: float = 1e-6
    max_newton_iters: int = 100
    ls_backtrack: float = 0.5
    ls_slope: float = 0.25
    ls_max_steps: int = 60
    hessian_form: str = "exact"
    strategy: str = "lyapunov_shortcut"
    axis_tol: float = AXIS_TOL
    x1_cond_max: float = X1_COND_MAX
    y_cond_max: float = Y_COND_MAX
    refine: bool | str = "auto"

    def __post_init__(self):
        if self.t0 is not None and not 0.0 < self.t0 <= self.t_max:
            raise ValueError("need 0 < t0 <= t_max")
        if self.t_factor <= 1.0:
            raise ValueError("t_factor must exceed 1")
        if not 0.0 < self.ls_backtrack < 1.0:
            raise ValueError("ls_backtrack must lie in (0, 1)")
        if not 0.0 < self.ls_slope < 0.5:
            raise ValueError("ls_slope must lie in (0, 0.5)")
        if self.refine not in (True, False, "auto"):
            raise ValueError(f"refine must be True, False or 'auto', got {self.refine!r}")
        if self.hessian_form not in ("exact", "doubled"):
            raise ValueError(f"unknown hessian_form {self.hessian_form!r}")

    def pair_kwargs(self) -> dict:
        return dict(strategy=self.strategy, axis_tol=self.axis_tol,
                    x1_cond_max=self.x1_cond_max, y_cond_max=self.y_cond_max,
                    refine=self.refine)


def _pd_factor(X: np.ndarray, name: str):
    if X.size == 0:
        return None
    try:
        return linalg.cho_factor(X, lower=True)
    except linalg.LinAlgError:
        raise OutOfDomain(f"{name} is not positive definite") from None


def _logdet(cho) -> float:
    if cho is None:
        return 0.0
    return 2.0 * float(np.sum(np.log(np.diag(cho[0]))))


def _solve(cho, X):
    return linalg.cho_solve(cho, X)


class _Factors(NamedTuple):
    N: object
    negR: object
    P: object
    Delta: object


def _factor_pair(pair: RiccatiPair) -> _Factors:
    return _Factors(_pd_factor(pair.N, "N(lambda)"), _pd_factor(-pair.R, "-R(lambda)"),
                    _pd_factor(pair.P_plus, "P_plus"), _pd_factor(pair.Delta, "Delta"))


def barrier_value(prob: KypProblem, pair: RiccatiPair, t: float) -> float:
    f = _factor_pair(pair)
    obj = prob.objective(pair.lam, pair.P_plus)
    return t * obj - _logdet(f.N) - _logdet(f.P) - _logdet(f.negR) - _logdet(f.Delta)


def evaluate_barrier(prob: KypProblem, lam, t: float,
                     config: SolverConfig | None = None) -> tuple[float, RiccatiPair]:
    """Barrier value ``v_t(lam)`` and the Riccati pair it was computed from.

    Raises
    ------
    OutOfDomain
        ``lam`` is outside the domain or one of ``N``, ``-R``, ``P_plus``,
        ``Delta`` is not positive definite.
    """
    config = config or SolverConfig()
    try:
        pair = compute_pair(prob, lam, **config.pair_kwargs())
    except _DOMAIN_ERRORS as exc:
        raise OutOfDomain(str(exc)) from exc
    return barrier_value(prob, pair, t), pair


class Margins(NamedTuple):
    N: float
    negR: float
    P_plus: float
    Delta: float

    @property
    def interior(self) -> bool:
        return min(self) > 0.0


def _min_eig(X):
    return float(np.linalg.eigvalsh(symmetrize(X))[0]) if X.size else math.inf


def feasibility_margins(prob: KypProblem, lam, config: SolverConfig | None = None) -> Margins:
    """Smallest eigenvalues of ``N``, ``-R``, ``P_plus``, ``Delta``; ``-inf`` outside the domain."""
    config = config or SolverConfig()
    Q, S, R, N = prob.evaluate(lam)
    try:
        pair = compute_pair(prob, lam, **config.pair_kwargs())
    except _DOMAIN_ERRORS:
        return Margins(_min_eig(N), _min_eig(-R), -math.inf, -math.inf)
    return Margins(_min_eig(N), _min_eig(-R), _min_eig(pair.P_plus), _min_eig(pair.Delta))


def _sym_coeffs(fam: AffineMatrixFamily):
    return [symmetrize(c) for c in fam.coeffs]


def gradient(prob: KypProblem, pair: RiccatiPair, bundle: DerivativeBundle, t: float) -> np.ndarray:
    """Gradient of ``v_t`` assembled from the Riccati derivative bundle."""
    f = _factor_pair(pair)
    dDelta = bundle.dDelta
    g = np.empty(prob.p)
    Rc, Nc = _sym_coeffs(prob.R), _sym_coeffs(prob.N)
    for i in range(prob.p):
        gi = -np.trace(_solve(f.Delta, dDelta[i]))
        gi += t * (prob.c[i] - np.sum(prob.Sigma * bundle.dP_plus[i]))
        gi -= np.trace(_solve(f.P, bundle.dP_plus[i]))
        # -tr R^{-1} R_i = tr (-R)^{-1} R_i
        if f.negR is not None:
            gi += np.trace(_solve(f.negR, Rc[i]))
        if f.N is not None:
            gi -= np.trace(_solve(f.N, Nc[i]))
        g[i] = gi
    return g


def _quad_terms(cho, mats):
    if cho is None:
        return np.zeros((len(mats), len(mats)))
    W = [_solve(cho, X) for X in mats]
    p = len(W)
    out = np.empty((p, p))
    for i in range(p):
        for j in range(i, p):
            out[i, j] = out[j, i] = np.sum(W[i] * W[j].T)
    return out


def _trace_inv(cho, table):
    p = len(table)
    out = np.zeros((p, p))
    if cho is None:
        return out
    for i in range(p):
        for j in range(i, p):
            out[i, j] = out[j, i] = np.trace(_solve(cho, table[i][j]))
    return out


def hessian(prob: KypProblem, pair: RiccatiPair, bundle: DerivativeBundle, t: float,
            form: str = "exact") -> np.ndarray:
    """Hessian of ``v_t``.

    ``form="exact"`` is the true second derivative. ``form="doubled"`` uses
    ``2 tr(X^{-1} X_i X^{-1} X_j)`` for each log-det term instead of
    ``tr(X^{-1} X_i X^{-1} X_j)``.
    """
    if form not in ("exact", "doubled"):
        raise ValueError(f"unknown form {form!r}")
    k = 2.0 if form == "doubled" else 1.0
    f = _factor_pair(pair)
    H = k * _quad_terms(f.P, bundle.dP_plus) - _trace_inv(f.P, bundle.d2P_plus)
    H += k * _quad_terms(f.negR, _sym_coeffs(prob.R))
    H += k * _quad_terms(f.N, _sym_coeffs(prob.N))
    H += k * _quad_terms(f.Delta, bundle.dDelta) - _trace_inv(f.Delta, bundle.d2Delta)
    p = prob.p
    for i in range(p):
        for j in range(i, p):
            H[i, j] -= t * np.sum(prob.Sigma * bundle.d2P_plus[i][j])
            H[j, i] = H[i, j]
    return symmetrize(H)


class NewtonStep(NamedTuple):
    direction: np.ndarray
    decrement: float
    gradient_fallback: bool = False


def newton_step(grad, hess) -> NewtonStep:
    """Solve ``H d = -g``; on a non-factorizable Hessian fall back to ``d = -g``."""
    g = np.atleast_1d(np.asarray(grad, dtype=float))
    H = np.atleast_2d(np.asarray(hess, dtype=float))
    if not np.any(g):
        return NewtonStep(np.zeros_like(g), 0.0)
    scale = max(1.0, float(np.max(np.abs(np.diag(H)))))
    for shift in (0.0, 1e-10 * scale, 1e-6 * scale):
        try:
            cho = linalg.cho_factor(H + shift * np.eye(len(g)), lower=True)
        except linalg.LinAlgError:
            continue
        d = -linalg.cho_solve(cho, g)
        gd = float(g @ d)
        if gd < 0.0:
            return NewtonStep(d, math.sqrt(-gd))
    return NewtonStep(-g, float(np.linalg.norm(g)), True)


@dataclass(frozen=True, eq=False)
class IterateState:
    lam: np.ndarray
    t: float
    pair: RiccatiPair
    bundle: DerivativeBundle
    v: float
    grad: np.ndarray
    hess: np.ndarray
    step: NewtonStep

    @property
    def newton_decrement(self) -> float:
        return self.step.decrement


def iterate_state(prob: KypProblem, pair: RiccatiPair, t: float,
                  config: SolverConfig | None = None) -> IterateState:
    config = config or SolverConfig()
    bundle = derivatives(prob, pair, axis_tol=config.axis_tol)
    g = gradient(prob, pair, bundle, t)
    H = hessian(prob, pair, bundle, t, config.hessian_form)
    return IterateState(pair.lam, t, pair, bundle, barrier_value(prob, pair, t), g, H,
                        newton_step(g, H))


@dataclass(frozen=True, eq=False)
class LineSearchResult:
    alpha: float
    value: float
    pair: Optional[RiccatiPair]
    probes: int
    domain_rejections: int


def line_search(prob: KypProblem, lam, d, t: float, v0: float, slope: float,
                config: SolverConfig | None = None) -> LineSearchResult:
    """Backtracking Armijo search with a domain safeguard.

    Starting from ``alpha = 1``, a step is rejected when the barrier cannot
    be evaluated (``OutOfDomain``) or when
    ``v(lam + alpha d) > v0 + ls_slope * alpha * slope``.

    Raises
    ------
    LineSearchFailed
        After ``ls_max_steps`` rejections, or once ``alpha d`` no longer
        changes ``lam``.
    """
    config = config or SolverConfig()
    lam = np.asarray(lam, dtype=float)
    d = np.asarray(d, dtype=float)
    if not np.any(d):
        return LineSearchResult(1.0, v0, None, 0, 0)
    alpha = 1.0
    rejected_domain = 0
    probes = 0
    for _ in range(config.ls_max_steps):
        trial = lam + alpha * d
        if np.array_equal(trial, lam):
            # step below the floating-point resolution of lam
            break
        probes += 1
        try:
            v, pair = evaluate_barrier(prob, trial, t, config)
        except OutOfDomain:
            rejected_domain += 1
        else:
            if v <= v0 + config.ls_slope * alpha * slope:
                return LineSearchResult(alpha, v, pair, probes, rejected_domain)
        alpha *= config.ls_backtrack
    err = LineSearchFailed(f"no acceptable step after {probes} trial points")
    err.domain_rejections = rejected_domain
    err.probes = probes
    raise err


@dataclass
class StageRecord:
    t: float
    newton_iters: int
    decrement: float
    value: float
    seconds: float
    converged: bool


@dataclass
class SolveReport:
    status: str
    lambda_opt: np.ndarray
    P_plus_opt: Optional[np.ndarray]
    objective: float
    newton_iters_total: int = 0
    riccati_solves: int = 0
    lyapunov_solves: int = 0
    t_final: float = 0.0
    decrement_final: float = math.nan
    gradient_fallbacks: int = 0
    newton_seconds: float = 0.0
    step_seconds: float = 0.0
    stopped_early: bool = False
    message: str = ""
    history: list = field(default_factory=list)

    @property
    def secs_per_iter(self) -> float:
        """Mean wall time of an accepted Newton iteration (derivatives, step, line search)."""
        return self.step_seconds / self.newton_iters_total if self.newton_iters_total else math.nan


def default_t0(prob: KypProblem, pair: RiccatiPair,
               bundle: DerivativeBundle | None = None) -> float:
    """Initial barrier weight that best centers the starting point.

    Minimizes ``|t grad f + grad phi|`` in the norm of the inverse barrier
    Hessian, where ``f`` is the objective and ``phi`` the log-det barrier.
    Falls back to ``1 / (1 + |f|)`` when that minimizer is not positive.
    """
    fallback = 1.0 / (1.0 + abs(prob.objective(pair.lam, pair.P_plus)))
    if bundle is None or prob.p == 0:
        return fallback
    g_phi = gradient(prob, pair, bundle, 0.0)
    g_f = gradient(prob, pair, bundle, 1.0) - g_phi
    try:
        cho = linalg.cho_factor(hessian(prob, pair, bundle, 0.0))
    except linalg.LinAlgError:
        return fallback
    hf = linalg.cho_solve(cho, g_f)
    den = float(g_f @ hf)
    t = -float(g_phi @ hf) / den if den > 0.0 else math.nan
    return t if math.isfinite(t) and t > 0.0 else fallback


def _resolution(v: float) -> float:
    """Smallest decrease of ``v`` worth pursuing; ``|v| ~ t |f|`` makes this relative in ``f``."""
    return 1e-10 * (1.0 + abs(v))


def solve(prob: KypProblem, lambda0, config: SolverConfig | None = None, *,
          stop_when: Callable[[np.ndarray], bool] | None = None) -> SolveReport:
    """Minimize ``c' lam - tr Sigma P_plus(lam)`` from a strictly feasible ``lambda0``.

    The outer loop runs t-stages while ``t <= t_max``; each stage takes
    damped Newton steps until the Newton decrement drops to ``newton_tol``.
    ``stop_when`` is polled after every accepted step and ends the solve
    early when it returns True.
    """
    config = config or SolverConfig()
    lam = np.atleast_1d(np.asarray(lambda0, dtype=float)).copy()
    counts = {"riccati": 0, "lyapunov": 0}
    try:
        counts["riccati"] += 1
        _, pair = evaluate_barrier(prob, lam, 0.0, config)
    except OutOfDomain as exc:
        return SolveReport("domain_error", lam, None, math.nan,
                           riccati_solves=counts["riccati"],
                           message=f"initial point is not strictly feasible: {exc}")
    counts["lyapunov"] += pair.lyapunov_solves
    if config.t0 is not None:
        t = config.t0
    else:
        bundle = derivatives(prob, pair, axis_tol=config.axis_tol)
        counts["lyapunov"] += bundle.lyapunov_solves
        t = min(default_t0(prob, pair, bundle), config.t_max)
    report = SolveReport("optimal", lam, pair.P_plus, prob.objective(lam, pair.P_plus))
    fallbacks = 0
    newton_total = 0
    newton_secs = 0.0
    step_secs = 0.0
    status = "optimal"
    message = ""
    decrement = math.nan
    stopped = False

    while not stopped:
        tick = time.perf_counter()
        converged = False
        iters = 0
        v = barrier_value(prob, pair, t)
        while iters < config.max_newton_iters:
            it_start = time.perf_counter()
            state = iterate_state(prob, pair, t, config)
            counts["lyapunov"] += state.bundle.lyapunov_solves
            decrement = state.step.decrement
            fallbacks += state.step.gradient_fallback
            if decrement <= config.newton_tol or 0.5 * decrement ** 2 <= _resolution(v):
                converged = True
                newton_secs += time.perf_counter() - it_start
                break
            slope = float(state.grad @ state.step.direction)
            noisy = 0.5 * decrement ** 2 <= NOISE_BAND * _resolution(v)
            # in the noise band a step below 2^-NOISE_PROBES cannot gain more
            # than the resolution, so backtracking further is wasted work
            ls_config = (replace(config, ls_max_steps=min(config.ls_max_steps, NOISE_PROBES))
                         if noisy else config)
            try:
                ls = line_search(prob, lam, state.step.direction, t, v, slope, ls_config)
            except LineSearchFailed as exc:
                newton_secs += time.perf_counter() - it_start
                counts["riccati"] += exc.probes
                counts["lyapunov"] += exc.probes * (config.strategy == "lyapunov_shortcut")
                if noisy and (exc.probes == 0 or exc.domain_rejections < exc.probes):
                    # Armijo failures only: v cannot resolve the predicted decrease
                    converged = True
                    break
                status, message = "domain_error", str(exc)
                break
            counts["riccati"] += ls.probes
            counts["lyapunov"] += ls.probes * (config.strategy == "lyapunov_shortcut")
            if ls.pair is not None:
                lam, v, pair = ls.pair.lam, ls.value, ls.pair
            iters += 1
            newton_total += 1
            elapsed = time.perf_counter() - it_start
            newton_secs += elapsed
            step_secs += elapsed
            if stop_when is not None and stop_when(lam):
                stopped = True
                break
        report.history.append(StageRecord(t, iters, decrement, v,
                                          time.perf_counter() - tick, converged))
        log.debug("t=%.3e iters=%d decrement=%.3e v=%.6e", t, iters, decrement, v)
        if status != "optimal":
            break
        if not converged and not stopped:
            status, message = "max_iters", f"stage t={t:.3e} hit {config.max_newton_iters} Newton iterations"
            break
        report.t_final = t
        if t >= config.t_max:
            break
        # the last stage always runs at t_max
        t = min(t * config.t_factor, config.t_max)

    report.status = status
    report.message = message
    report.lambda_opt = lam
    report.P_plus_opt = pair.P_plus
    report.objective = prob.objective(lam, pair.P_plus)
    report.newton_iters_total = newton_total
    report.riccati_solves = counts["riccati"]
    report.lyapunov_solves = counts["lyapunov"]
    report.decrement_final = decrement
    report.gradient_fallbacks = fallbacks
    report.newton_seconds = newton_secs
    report.step_seconds = step_secs
    report.stopped_early = stopped
    return report


# ---------------------------------------------------------------------------
# Phase I

@dataclass(frozen=True, eq=False)
class InfeasibleCertificate:
    """Best shift ``lambda_0 >= 0`` reached by the phase-I problem."""

    lambda0: float
    lam: np.ndarray
    report: Optional[SolveReport] = None


def phase1_problem(prob: KypProblem, center=None, radius: float | None = None) -> KypProblem:
    """Augmented instance over ``(lambda_0, lam)`` with shifted multiplier families.

    ``Q - lambda_0 I``, ``R - lambda_0 I``, ``N + lambda_0 I``, unchanged
    ``S``, objective ``lambda_0`` and ``Sigma = 0``. With ``radius`` the
    multiplier block also carries the box ``|lam_i - center_i| < radius``
    (unshifted), which keeps the auxiliary barrier bounded below.
    """
    n, m, r, p = prob.n, prob.m, prob.r, prob.p
    N = prob.N.prepend(np.eye(r))
    if radius is not None:
        center = np.zeros(p) if center is None else np.asarray(center, dtype=float)
        base = linalg.block_diag(N.base, np.diag(np.concatenate([radius + center,
                                                                 radius - center])))
        coeffs = [linalg.block_diag(N.coeffs[0], np.zeros((2 * p, 2 * p)))]
        for i in range(p):
            box = np.zeros(2 * p)
            box[i], box[p + i] = -1.0, 1.0
            coeffs.append(linalg.block_diag(N.coeffs[i + 1], np.diag(box)))
        N = AffineMatrixFamily(base, coeffs, symmetric=True)
    return KypProblem(
        A=prob.A, B=prob.B,
        c=np.concatenate([[1.0], np.zeros(p)]),
        Sigma=np.zeros((n, n)),
        Q=prob.Q.prepend(-np.eye(n)),
        S=prob.S.prepend(np.zeros((n, m))),
        R=prob.R.prepend(-np.eye(m)),
        N=N,
    )


def _max_eig(X):
    return float(np.linalg.eigvalsh(symmetrize(X))[-1]) if X.size else -math.inf


def phase1(prob: KypProblem, config: SolverConfig | None = None, *,
           lambda_hint=None, radius: float = 1e3, max_doublings: int = 200):
    """Find a strictly feasible ``lam`` or certify infeasibility.

    Returns
    -------
    numpy.ndarray or InfeasibleCertificate
        A point with all four feasibility margins positive, or the
        certificate carrying the best ``lambda_0 >= 0`` of the auxiliary
        problem. Only points inside the box of half-width ``radius`` (scaled
        by ``max(1, |lambda_hint|_inf)``) around ``lambda_hint`` are searched.
    """
    config = config or SolverConfig()
    lam_hat = np.zeros(prob.p) if lambda_hint is None else np.asarray(lambda_hint, dtype=float)
    aug = phase1_problem(prob, lam_hat, radius * max(1.0, float(np.max(np.abs(lam_hat), initial=0.0))))
    Q, S, R, N = prob.evaluate(lam_hat)
    shift = 2.0 * max(0.0, _max_eig(R), -_min_eig(N) if N.size else 0.0)
    shift = max(shift, 1.0)
    for _ in range(max_doublings):
        try:
            evaluate_barrier(aug, np.concatenate([[shift], lam_hat]), 0.0, config)
            break
        except OutOfDomain:
            shift *= 2.0
    else:
        raise OutOfDomain("phase I could not find a shift that makes the auxiliary problem interior")

    def done(lt):
        return lt[0] < 0.0 and feasibility_margins(prob, lt[1:], config).interior

    aux_config = replace(config, t0=None, t_max=max(config.t_max, PHASE1_T_MAX))
    report = solve(aug, np.concatenate([[shift], lam_hat]), aux_config, stop_when=done)
    lt = report.lambda_opt
    if lt[0] < 0.0 and feasibility_margins(prob, lt[1:], config).interior:
        return lt[1:].copy()
    return InfeasibleCertificate(float(lt[0]), lt[1:].copy(), report)
