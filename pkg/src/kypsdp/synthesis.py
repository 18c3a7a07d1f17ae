"""Robust state-feedback (robust LQR) instances in KYP standard form.

Plant::

    xdot = Acal x + B1 u + B2 w
    z    = Ccal x + D1 u + D2 w

with the uncertain channel ``w = Delta(z)`` described by an affine
multiplier ``M(lam)`` on ``(z, w)``. Eliminating the feedback gain leaves a
KYP inequality in ``P`` (the inverse of the Lyapunov matrix of
``V(x) = x' P^{-1} x``) whose standard-form data is

    A = Acal',  B = [I_n, Ccal'],  [Q S; S' R](lam) = -L' D(lam) L,
    D(lam) = blockdiag(Qcal^{-1}, Rcal^{-1}, M(lam)),

with objective ``-trace P`` (``c = 0``, ``Sigma = I``).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy import linalg

from .errors import DimensionError
from .model import AffineMatrixFamily, KypProblem, symmetrize


@dataclass(frozen=True, eq=False)
class PlantModel:
    Acal: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    Ccal: np.ndarray
    D1: np.ndarray
    D2: np.ndarray

    def __post_init__(self):
        for name in ("Acal", "B1", "B2", "Ccal", "D1", "D2"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        n, m, d, l = self.n, self.m, self.d, self.l
        shapes = {"Acal": (n, n), "B1": (n, m), "B2": (n, d), "Ccal": (l, n),
                  "D1": (l, m), "D2": (l, d)}
        for name, shape in shapes.items():
            if getattr(self, name).shape != shape:
                raise DimensionError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def n(self) -> int:
        return self.Acal.shape[0]

    @property
    def m(self) -> int:
        return self.B1.shape[1]

    @property
    def d(self) -> int:
        return self.B2.shape[1]

    @property
    def l(self) -> int:
        return self.Ccal.shape[0]


@dataclass(frozen=True, eq=False)
class SynthesisSpec:
    plant: PlantModel
    Qcal: np.ndarray
    Rcal: np.ndarray
    Mfam: AffineMatrixFamily
    Nfam: AffineMatrixFamily

    def __post_init__(self):
        pl = self.plant
        if self.Mfam.base.shape != (pl.l + pl.d, pl.l + pl.d):
            raise DimensionError(f"M must be {(pl.l + pl.d,) * 2}, got {self.Mfam.base.shape}")
        if self.Qcal.shape != (pl.n, pl.n) or self.Rcal.shape != (pl.m, pl.m):
            raise DimensionError("weights do not match the plant dimensions")
        if self.Nfam.p != self.Mfam.p:
            raise DimensionError("M and N families must have the same number of multipliers")

    @property
    def p(self) -> int:
        return self.Mfam.p

    def split_M(self, M: np.ndarray):
        l = self.plant.l
        return M[:l, :l], M[:l, l:], M[l:, :l], M[l:, l:]


def generate_mass_spring_chain(k: int, damping: float = 0.1):
    """Chain of ``k`` unit masses with unit springs, force on the last mass.

    Mass 1 is tied to a wall; every spring has a parallel damper of
    coefficient ``damping``. State order is positions then velocities.

    Returns
    -------
    Acal : (2k, 2k) ndarray
    B1 : (2k, 1) ndarray
    """
    if k < 1:
        raise ValueError("need at least one mass")
    K = 2.0 * np.eye(k) - np.eye(k, k=1) - np.eye(k, k=-1)
    K[-1, -1] = 1.0
    Acal = np.block([[np.zeros((k, k)), np.eye(k)], [-K, -damping * K]])
    B1 = np.zeros((2 * k, 1))
    B1[-1, 0] = 1.0
    return Acal, B1


def build_actuator_uncertainty(Acal, B1, gamma: float, Qcal=None, Rcal=None) -> SynthesisSpec:
    """Multiplicative actuator uncertainty with ``M(lam) = diag(gamma^2 lam, -lam)``.

    Sets ``Ccal = 0``, ``D1 = I``, ``D2 = 0``, ``B2 = B1`` and
    ``N(lam) = diag(lam)``.

    The uncertain channel obeys the quadratic constraint with ``M(lam)^{-1}``,
    so each input ``u_i`` is perturbed by some ``w_i`` with
    ``|w_i| <= |u_i| / gamma``. Larger ``gamma`` therefore means a smaller
    perturbation. For ``gamma <= 1`` the admissible set contains a complete
    loss of actuation, and only open-loop stable plants stay feasible.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    Acal = np.atleast_2d(np.asarray(Acal, dtype=float))
    B1 = np.asarray(B1, dtype=float).reshape(Acal.shape[0], -1)
    n, m = B1.shape
    plant = PlantModel(Acal, B1, B1.copy(), np.zeros((m, n)), np.eye(m), np.zeros((m, m)))
    Mc = []
    Nc = []
    for i in range(m):
        diag = np.zeros(2 * m)
        diag[i] = gamma ** 2
        diag[m + i] = -1.0
        Mc.append(np.diag(diag))
        e = np.zeros((m, m))
        e[i, i] = 1.0
        Nc.append(e)
    Mfam = AffineMatrixFamily(np.zeros((2 * m, 2 * m)), Mc, symmetric=True)
    Nfam = AffineMatrixFamily(np.zeros((m, m)), Nc, symmetric=True)
    Qcal = np.eye(n) if Qcal is None else np.atleast_2d(np.asarray(Qcal, dtype=float))
    Rcal = np.eye(m) if Rcal is None else np.atleast_2d(np.asarray(Rcal, dtype=float))
    return SynthesisSpec(plant, Qcal, Rcal, Mfam, Nfam)


class MultiplierCheck(NamedTuple):
    ok: bool
    outer_margin: float  # min eig of [I; D2']' M [I; D2']
    m22_margin: float    # min eig of -M22


def check_multiplier_conditions(spec: SynthesisSpec, lam) -> MultiplierCheck:
    """Both multiplier conditions: ``[I; D2']' M [I; D2'] > 0`` and ``M22 < 0``."""
    M = spec.Mfam(lam)
    l = spec.plant.l
    T = np.vstack([np.eye(l), spec.plant.D2.T])
    outer = symmetrize(T.T @ M @ T)
    M22 = spec.split_M(M)[3]
    om = float(np.linalg.eigvalsh(outer)[0]) if l else np.inf
    mm = float(np.linalg.eigvalsh(-symmetrize(M22))[0]) if M22.size else np.inf
    return MultiplierCheck(om > 0.0 and mm > 0.0, om, mm)


def _kyp_blocks(plant: PlantModel, Qinv, Rinv, M):
    """``-L' D L`` split into standard-form (Q, S, R) blocks, expanded blockwise.

    Columns of ``L`` are grouped (x: n, v: n, z: l); rows are weighted by
    ``Qinv``, ``Rinv`` and the 2x2 multiplier blocks.
    """
    n, l = plant.n, plant.l
    B1, B2, D1, D2 = plant.B1, plant.B2, plant.D1, plant.D2
    M11, M12, M21, M22 = M[:l, :l], M[:l, l:], M[l:, :l], M[l:, l:]
    xx = B1 @ Rinv @ B1.T + B2 @ M22 @ B2.T
    xz = B1 @ Rinv @ D1.T + B2 @ (M22 @ D2.T - M21)
    zz = D1 @ Rinv @ D1.T + M11 - M12 @ D2.T - D2 @ M21 + D2 @ M22 @ D2.T
    Q = -symmetrize(xx)
    S = -np.hstack([np.zeros((n, n)), xz])
    R = -linalg.block_diag(Qinv, symmetrize(zz))
    return Q, S, symmetrize(R)


def assemble_kyp_sdp(spec: SynthesisSpec, Sigma: Optional[np.ndarray] = None) -> KypProblem:
    """Standard-form instance whose objective ``-tr(Sigma P)`` defaults to ``-trace P``."""
    pl = spec.plant
    Qinv = symmetrize(np.linalg.inv(spec.Qcal))
    Rinv = symmetrize(np.linalg.inv(spec.Rcal))
    Q0, S0, R0 = _kyp_blocks(pl, Qinv, Rinv, spec.Mfam.base)
    zn, zm = np.zeros((pl.n, pl.n)), np.zeros((pl.m, pl.m))
    parts = [_kyp_blocks(pl, zn, zm, Mi) for Mi in spec.Mfam.coeffs]
    B = np.hstack([np.eye(pl.n), pl.Ccal.T])
    return KypProblem(
        A=pl.Acal.T.copy(),
        B=B,
        c=np.zeros(spec.p),
        Sigma=np.eye(pl.n) if Sigma is None else Sigma,
        Q=AffineMatrixFamily(Q0, [q for q, _, _ in parts], symmetric=True),
        S=AffineMatrixFamily(S0, [s for _, s, _ in parts]),
        R=AffineMatrixFamily(R0, [r for _, _, r in parts], symmetric=True),
        N=spec.Nfam,
    )


def probe_start(prob: KypProblem, direction=None, exponents=range(0, -17, -1)):
    """First ``10**e * direction`` (``e`` decreasing) with all feasibility margins positive.

    Actuator-uncertainty instances are feasible on a thin slab ``0 < lam < eps``
    whose width shrinks quickly with the chain length, which the auxiliary
    phase-I path does not resolve cheaply. Returns ``None`` when no probe is
    interior.
    """
    from .barrier import feasibility_margins

    d = np.ones(prob.p) if direction is None else np.asarray(direction, dtype=float)
    for e in exponents:
        lam = 10.0 ** e * d
        if feasibility_margins(prob, lam).interior:
            return lam
    return None
