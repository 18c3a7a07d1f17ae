"""Standard form of a KYP semidefinite program.

An instance is

    minimize    c' lam - trace(Sigma P)
    subject to  [A B; I 0]' [0 P; P 0] [A B; I 0] + [Q S; S' R](lam) < 0,
                N(lam) > 0,  P > 0,

where every multiplier matrix is an affine function of ``lam``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DimensionError

RANK_TOL = 1e-10
SYM_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


def symmetrize(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + X.T)


@dataclass(frozen=True, eq=False)
class AffineMatrixFamily:
    """Affine matrix function ``H(lam) = H_0 + sum_i lam_i H_i``.

    Parameters
    ----------
    base : (rows, cols) array_like
        Constant term ``H_0``.
    coeffs : sequence of (rows, cols) array_like
        Coefficient matrices ``H_1, ..., H_p``.
    symmetric : bool
        Whether every member is meant to be symmetric. Evaluation of a
        symmetric family is exactly symmetrized; the flag itself is only
        checked by :func:`validate_problem`.
    """

    base: np.ndarray
    coeffs: np.ndarray = field(default=None)
    symmetric: bool = False

    def __post_init__(self):
        base = np.atleast_2d(np.asarray(self.base, dtype=float))
        if base.ndim != 2:
            raise DimensionError(f"family base must be a matrix, got shape {base.shape}")
        raw = [] if self.coeffs is None else list(self.coeffs)
        stack = np.zeros((len(raw),) + base.shape)
        for i, c in enumerate(raw):
            c = np.asarray(c, dtype=float)
            if c.ndim < 2 and base.shape == (1, 1):
                c = c.reshape(1, 1)
            if c.shape != base.shape:
                raise DimensionError(
                    f"coefficient {i + 1} has shape {c.shape}, base has {base.shape}")
            stack[i] = c
        object.__setattr__(self, "base", _frozen(base))
        object.__setattr__(self, "coeffs", _frozen(stack))

    @classmethod
    def constant(cls, base, p: int, symmetric: bool = False) -> "AffineMatrixFamily":
        base = np.atleast_2d(np.asarray(base, dtype=float))
        return cls(base, np.zeros((p,) + base.shape), symmetric)

    @property
    def p(self) -> int:
        return self.coeffs.shape[0]

    @property
    def rows(self) -> int:
        return self.base.shape[0]

    @property
    def cols(self) -> int:
        return self.base.shape[1]

    def coeff(self, i: int) -> np.ndarray:
        """Coefficient ``H_{i+1}`` (zero-based ``i``)."""
        return self.coeffs[i]

    def __call__(self, lam) -> np.ndarray:
        return evaluate_family(self, lam)

    def prepend(self, coeff) -> "AffineMatrixFamily":
        """Family with an extra leading coefficient (new variable in front)."""
        coeff = np.asarray(coeff, dtype=float).reshape(self.base.shape)
        return AffineMatrixFamily(self.base, np.concatenate([coeff[None], self.coeffs]),
                                  self.symmetric)


def evaluate_family(fam: AffineMatrixFamily, lam) -> np.ndarray:
    """Evaluate ``H_0 + sum_i lam_i H_i``; symmetric families come back exactly symmetric."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if lam.ndim != 1 or lam.shape[0] != fam.p:
        raise DimensionError(f"lambda has length {lam.size}, family expects {fam.p}")
    H = fam.base + np.tensordot(lam, fam.coeffs, axes=1) if fam.p else fam.base.copy()
    if fam.symmetric:
        H = symmetrize(H)
    return H


class Finding(NamedTuple):
    severity: str  # "error" | "warning"
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...] = ()

    @property
    def ok(self) -> bool:
        return not any(f.severity == "error" for f in self.findings)

    def codes(self) -> list[str]:
        return [f.code for f in self.findings]


@dataclass(frozen=True, eq=False)
class KypProblem:
    A: np.ndarray
    B: np.ndarray
    c: np.ndarray
    Sigma: np.ndarray
    Q: AffineMatrixFamily
    S: AffineMatrixFamily
    R: AffineMatrixFamily
    N: AffineMatrixFamily

    def __post_init__(self):
        object.__setattr__(self, "A", _frozen(np.atleast_2d(self.A)))
        object.__setattr__(self, "B", _frozen(np.atleast_2d(self.B)))
        object.__setattr__(self, "c", _frozen(np.atleast_1d(self.c)))
        object.__setattr__(self, "Sigma", _frozen(np.atleast_2d(self.Sigma)))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.c.shape[0]

    @property
    def r(self) -> int:
        return self.N.rows

    def families(self) -> dict[str, AffineMatrixFamily]:
        return {"Q": self.Q, "S": self.S, "R": self.R, "N": self.N}

    def evaluate(self, lam):
        """Return ``(Q, S, R, N)`` evaluated at ``lam``."""
        return self.Q(lam), self.S(lam), self.R(lam), self.N(lam)

    def objective(self, lam, P_plus) -> float:
        return float(self.c @ np.asarray(lam, dtype=float) - np.sum(self.Sigma * P_plus))


def _is_symmetric(H: np.ndarray, tol: float = SYM_TOL) -> bool:
    return bool(np.all(np.abs(H - H.T) <= tol * (1.0 + np.abs(H))))


def controllability_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    blocks = [B]
    for _ in range(A.shape[0] - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def is_controllable(A, B, rank_tol: float = RANK_TOL) -> bool:
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    n = A.shape[0]
    sv = np.linalg.svd(controllability_matrix(A, B), compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return False
    return int(np.sum(sv > n * sv[0] * rank_tol)) == n


def validate_problem(prob: KypProblem, rank_tol: float = RANK_TOL) -> ValidationReport:
    """Check dimensions, symmetry flags, ``Sigma >= 0`` and controllability of ``(A, B)``.

    Every failure becomes a finding; nothing is raised.
    """
    out: list[Finding] = []

    def err(code, msg):
        out.append(Finding("error", code, msg))

    A, B = prob.A, prob.B
    n = A.shape[0]
    pair_ok = A.shape[0] == A.shape[1] and B.shape[0] == n
    if A.shape[0] != A.shape[1]:
        err("dims", f"A must be square, got {A.shape}")
    if B.shape[0] != n:
        err("dims", f"B has {B.shape[0]} rows, A has {n}")
    m = B.shape[1]
    p = prob.c.shape[0]
    expected = {"Q": (n, n), "S": (n, m), "R": (m, m), "N": (prob.N.rows, prob.N.rows)}
    for name, fam in prob.families().items():
        if fam.p != p:
            err("dims", f"family {name} has {fam.p} coefficients, c has length {p}")
        if fam.base.shape != expected[name]:
            err("dims", f"family {name} has shape {fam.base.shape}, expected {expected[name]}")
        if name != "S":
            if not fam.symmetric:
                out.append(Finding("warning", "symmetry-flag", f"family {name} not flagged symmetric"))
            members = [("base", fam.base)] + [(str(i + 1), c) for i, c in enumerate(fam.coeffs)]
            for label, H in members:
                if H.shape[0] == H.shape[1] and not _is_symmetric(H):
                    err("nonsymmetric", f"family {name} member {label} is not symmetric")
    Sig = prob.Sigma
    if Sig.shape != (n, n):
        err("dims", f"Sigma has shape {Sig.shape}, expected {(n, n)}")
    elif not _is_symmetric(Sig):
        err("nonsymmetric", "Sigma is not symmetric")
    else:
        psd_tol = 1e-10 * (1.0 + np.linalg.norm(Sig, 2))
        if n and np.linalg.eigvalsh(symmetrize(Sig))[0] < -psd_tol:
            err("sigma-not-psd", "Sigma not PSD")
    if pair_ok and not is_controllable(A, B, rank_tol):
        err("uncontrollable", "(A, B) is uncontrollable")
    return ValidationReport(tuple(out))
