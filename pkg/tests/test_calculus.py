import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kypsdp.calculus import compute_pair, delta_via_lyapunov, derivatives, first_derivatives
from kypsdp.equations import solve_riccati
from kypsdp.errors import NotInDomain
from kypsdp.verification import fd_check

from _instances import random_feasible, s1


@pytest.mark.parametrize("strategy", ["lyapunov_shortcut", "two_solves"])
def test_s1_pair(strategy):
    # P_plus = sqrt(lam), P_minus = -sqrt(lam)
    pair = compute_pair(s1(), [4.0], strategy)
    assert pair.P_plus[0, 0] == pytest.approx(2.0)
    assert pair.P_minus[0, 0] == pytest.approx(-2.0)
    assert pair.Delta[0, 0] == pytest.approx(4.0)


def test_s1_outside_domain():
    with pytest.raises(NotInDomain):
        compute_pair(s1(), [-1.0])


def test_s1_derivatives():
    # d sqrt(lam) = 1/2, d^2 sqrt(lam) = -1/4 at lam = 1
    b = derivatives(s1(), compute_pair(s1(), [1.0]))
    assert b.dP_plus[0][0, 0] == pytest.approx(0.5)
    assert b.dP_minus[0][0, 0] == pytest.approx(-0.5)
    assert b.d2P_plus[0][0][0, 0] == pytest.approx(-0.25)
    assert b.dDelta[0][0, 0] == pytest.approx(1.0)
    assert b.d2Delta[0][0][0, 0] == pytest.approx(-0.5)
    assert b.lyapunov_solves == 4


def test_decoupled_diagonal_instance():
    # two independent scalar copies with Q = -lam_i on the i-th state
    from kypsdp.model import AffineMatrixFamily, KypProblem
    E = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]
    prob = KypProblem(A=np.zeros((2, 2)), B=np.eye(2), c=[0.0, 0.0], Sigma=np.eye(2),
                      Q=AffineMatrixFamily(np.zeros((2, 2)), [-E[0], -E[1]], symmetric=True),
                      S=AffineMatrixFamily(np.zeros((2, 2)), [np.zeros((2, 2))] * 2),
                      R=AffineMatrixFamily(-np.eye(2), [np.zeros((2, 2))] * 2, symmetric=True),
                      N=AffineMatrixFamily(np.zeros((2, 2)), E, symmetric=True))
    pair = compute_pair(prob, [4.0, 9.0])
    assert np.allclose(pair.P_plus, np.diag([2.0, 3.0]))
    b = derivatives(prob, pair)
    assert np.allclose(b.dP_plus[0], np.diag([0.25, 0.0]))
    assert np.allclose(b.d2P_plus[0][1], 0.0)


@pytest.mark.parametrize("seed", range(8))
def test_shortcut_gap_matches_two_solves(seed):
    prob, lam = random_feasible(np.random.default_rng(300 + seed))
    a = compute_pair(prob, lam, "lyapunov_shortcut")
    b = compute_pair(prob, lam, "two_solves")
    scale = 1 + np.linalg.norm(b.Delta)
    assert np.linalg.norm(a.Delta - b.Delta) <= 1e-7 * scale
    assert np.linalg.norm(a.K_plus - b.K_plus) <= 1e-6 * (1 + np.linalg.norm(b.K_plus))


def test_gap_from_either_solution():
    prob, lam = random_feasible(np.random.default_rng(7), n=4)
    Q, S, R, _ = prob.evaluate(lam)
    minus = solve_riccati(prob.A, prob.B, Q, S, R, "stabilizing")
    plus = solve_riccati(prob.A, prob.B, Q, S, R, "antistabilizing")
    Y = delta_via_lyapunov(prob.A, prob.B, S, R, minus)
    Y2 = delta_via_lyapunov(prob.A, prob.B, S, R, plus)
    assert np.allclose(Y, plus.P - minus.P, atol=1e-8)
    assert np.allclose(Y2, minus.P - plus.P, atol=1e-8)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_derivatives_match_finite_differences(seed):
    prob, lam = random_feasible(np.random.default_rng(seed), n=4, p=2)
    rep = fd_check(prob, lam)
    assert not rep.skipped
    assert rep.first_error <= 1e-5
    assert rep.second_error <= 1e-4


def test_derivative_symmetry_of_second_table():
    prob, lam = random_feasible(np.random.default_rng(11), n=3, p=3)
    b = derivatives(prob, compute_pair(prob, lam))
    for i in range(3):
        for j in range(3):
            assert np.array_equal(b.d2P_plus[i][j], b.d2P_plus[j][i])


def test_first_derivative_lyapunov_identity():
    # (A - B K)' dP + dP (A - B K) + [I; -K]' W_i [I; -K] = 0
    prob, lam = random_feasible(np.random.default_rng(12), n=4, p=1)
    pair = compute_pair(prob, lam)
    dP = first_derivatives(prob, pair).dP_plus[0]
    K = pair.K_plus
    M = prob.A - prob.B @ K
    X = np.vstack([np.eye(prob.n), -K])
    W = np.block([[prob.Q.coeff(0), prob.S.coeff(0)], [prob.S.coeff(0).T, prob.R.coeff(0)]])
    res = M.T @ dP + dP @ M + X.T @ W @ X
    assert np.linalg.norm(res) <= 1e-9 * (1 + np.linalg.norm(dP))
