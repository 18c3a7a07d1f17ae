"""Random instance generators shared by the test modules.

Feasibility at a chosen point ``lam_bar`` is built in rather than searched
for: with ``R = -beta I`` and ``Q = -S S' / beta - a I`` the reduced matrix
``Q - S R^{-1} S'`` equals ``-a I``, so ``P = eps I`` satisfies the strict
Riccati inequality for small ``eps`` and ``P_plus`` is positive definite.
"""
from __future__ import annotations

import numpy as np

from kypsdp.model import AffineMatrixFamily, KypProblem, is_controllable, symmetrize


def s1(c=1.0, sigma=1.0, n_sign=1.0) -> KypProblem:
    """Scalar instance ``A=0, B=1, Q=-lam, S=0, R=-1, N=n_sign*lam``."""
    one = np.ones((1, 1))
    zero = np.zeros((1, 1))
    return KypProblem(
        A=zero, B=one, c=[c], Sigma=[[sigma]],
        Q=AffineMatrixFamily(zero, [-one], symmetric=True),
        S=AffineMatrixFamily(zero, [zero]),
        R=AffineMatrixFamily(-one, [zero], symmetric=True),
        N=AffineMatrixFamily(zero, [n_sign * one], symmetric=True),
    )


def _sym(rng, k, scale=1.0):
    X = rng.standard_normal((k, k))
    return scale * symmetrize(X)


def _controllable_pair(rng, n, m):
    while True:
        A = rng.standard_normal((n, n)) / np.sqrt(n)
        B = rng.standard_normal((n, m))
        if is_controllable(A, B):
            return A, B


def random_feasible(rng, n=None, m=None, p=None, r=None, coeff_scale=0.3):
    """Instance with a strictly feasible point ``lam_bar``.

    Returns
    -------
    prob : KypProblem
    lam_bar : ndarray
    """
    n = n or int(rng.integers(1, 7))
    m = m or int(rng.integers(1, 3))
    p = p or int(rng.integers(1, 4))
    r = r or int(rng.integers(1, 3))
    A, B = _controllable_pair(rng, n, m)
    beta = rng.uniform(0.5, 2.0)
    a = rng.uniform(0.5, 2.0)
    S_bar = 0.5 * rng.standard_normal((n, m))
    targets = {
        "Q": -S_bar @ S_bar.T / beta - a * np.eye(n),
        "S": S_bar,
        "R": -beta * np.eye(m),
        "N": np.eye(r) + 0.2 * _sym(rng, r),
    }
    targets["N"] += (0.5 - min(0.0, np.linalg.eigvalsh(targets["N"])[0])) * np.eye(r)
    lam_bar = rng.uniform(0.5, 2.0, size=p)
    shapes = {"Q": (n, n), "S": (n, m), "R": (m, m), "N": (r, r)}
    fams = {}
    for name, shape in shapes.items():
        if name == "S":
            coeffs = [coeff_scale * rng.standard_normal(shape) for _ in range(p)]
        else:
            coeffs = [_sym(rng, shape[0], coeff_scale) for _ in range(p)]
        base = targets[name] - sum(l * C for l, C in zip(lam_bar, coeffs))
        fams[name] = AffineMatrixFamily(base, coeffs, symmetric=name != "S")
    c = rng.uniform(-0.5, 0.5, size=p)
    G = rng.standard_normal((n, n))
    Sigma = G @ G.T / n
    return KypProblem(A=A, B=B, c=c, Sigma=Sigma, **fams), lam_bar


def random_scalar_multiplier(rng, n=None, m=None):
    """``p = 1`` instance with ``Q(lam) = Q0 - lam Q1``, constant ``R``, ``N = lam``.

    ``P_plus`` grows concavely in ``lam``. The cost ``c`` is set to
    ``tr Sigma dP_plus/dlam`` at a target point, which makes that point the
    minimizer of ``c lam - tr Sigma P_plus(lam)``; tests compare solvers
    against the grid oracle, never against the target itself.

    Returns
    -------
    prob : KypProblem
    lam_feasible : float
        A strictly feasible multiplier.
    """
    from kypsdp.calculus import compute_pair, first_derivatives

    n = n or int(rng.integers(2, 9))
    m = m or int(rng.integers(1, 3))
    A, B = _controllable_pair(rng, n, m)
    beta = rng.uniform(0.5, 2.0)
    S = 0.5 * rng.standard_normal((n, m))
    W = rng.standard_normal((n, n)) / np.sqrt(n)
    Q1 = W @ W.T + 0.2 * np.eye(n)
    E = _sym(rng, n, 0.5)
    Q0 = -S @ S.T / beta + E
    # Q - S R^{-1} S' = E - lam Q1, negative definite beyond lam_neg
    lam_neg = max(0.0, float(np.max(np.linalg.eigvals(np.linalg.solve(Q1, E)).real))) + 0.1
    G = rng.standard_normal((n, n))
    Sigma = G @ G.T / n
    one = np.ones((1, 1))
    base = KypProblem(
        A=A, B=B, c=[0.0], Sigma=Sigma,
        Q=AffineMatrixFamily(Q0, [-Q1], symmetric=True),
        S=AffineMatrixFamily(S, [np.zeros((n, m))]),
        R=AffineMatrixFamily(-beta * np.eye(m), [np.zeros((m, m))], symmetric=True),
        N=AffineMatrixFamily(np.zeros((1, 1)), [one], symmetric=True),
    )
    lam_target = lam_neg * rng.uniform(1.5, 3.0)
    pair = compute_pair(base, [lam_target])
    dP = first_derivatives(base, pair).dP_plus[0]
    c = float(np.sum(Sigma * dP))
    prob = KypProblem(A=A, B=B, c=[c], Sigma=Sigma, Q=base.Q, S=base.S, R=base.R, N=base.N)
    return prob, lam_target


def infeasible_s1() -> KypProblem:
    """``N = -lam`` while the domain needs ``lam > 0``."""
    return s1(n_sign=-1.0)
