import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import optimize

from kypsdp.barrier import (InfeasibleCertificate, SolverConfig, evaluate_barrier,
                            feasibility_margins, gradient, hessian, iterate_state,
                            line_search, newton_step, phase1, phase1_problem, solve)
from kypsdp.calculus import compute_pair, derivatives
from kypsdp.errors import LineSearchFailed, OutOfDomain

from _instances import infeasible_s1, random_feasible, s1


def s1_value(lam, t):
    # P_plus = sqrt(lam), Delta = 2 sqrt(lam), N = lam, -R = 1
    return t * (lam - math.sqrt(lam)) - 2.0 * math.log(lam) - math.log(2.0)


def state_at(prob, lam, t):
    pair = compute_pair(prob, lam)
    return pair, derivatives(prob, pair)


def test_s1_value():
    v, _ = evaluate_barrier(s1(), [1.0], 1.0)
    assert v == pytest.approx(-0.693147, abs=1e-6)
    v0, _ = evaluate_barrier(s1(), [1.0], 0.0)
    assert v0 == pytest.approx(-math.log(2.0))


def test_s1_value_outside_domain():
    with pytest.raises(OutOfDomain):
        evaluate_barrier(s1(), [-1.0], 1.0)


def test_s1_gradient():
    prob = s1()
    pair, b = state_at(prob, [1.0], 1.0)
    assert gradient(prob, pair, b, 1.0)[0] == pytest.approx(-1.5)
    assert gradient(prob, pair, b, 0.0)[0] == pytest.approx(-2.0)


def test_s1_hessian_exact_matches_closed_form():
    # d^2/dlam^2 of t(lam - sqrt lam) - 2 log lam at lam = 1: t/4 + 2
    prob = s1()
    pair, b = state_at(prob, [1.0], 1.0)
    assert hessian(prob, pair, b, 1.0)[0, 0] == pytest.approx(2.25)
    assert hessian(prob, pair, b, 0.0)[0, 0] == pytest.approx(2.0)


def test_s1_hessian_doubled_form():
    prob = s1()
    pair, b = state_at(prob, [1.0], 1.0)
    assert hessian(prob, pair, b, 1.0, "doubled")[0, 0] == pytest.approx(3.75)
    assert hessian(prob, pair, b, 0.0, "doubled")[0, 0] == pytest.approx(3.5)


def test_s1_value_matches_closed_form_along_path():
    for lam in (0.1, 0.7, 2.5):
        for t in (0.0, 1.0, 30.0):
            v, _ = evaluate_barrier(s1(), [lam], t)
            assert v == pytest.approx(s1_value(lam, t), rel=1e-12, abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.5, 3.0]))
def test_gradient_and_hessian_match_finite_differences(seed, t):
    prob, lam = random_feasible(np.random.default_rng(seed), n=4, p=2)
    pair, b = state_at(prob, lam, t)
    # barrier values of badly scaled instances (|P| ~ 1e6) carry ~1e-8 noise,
    # which a fixed-step difference cannot separate from the derivative
    assume(np.linalg.norm(pair.P_plus) + np.linalg.norm(pair.P_minus) <= 1e4)
    g = gradient(prob, pair, b, t)
    H = hessian(prob, pair, b, t)
    h = 1e-5
    g_fd = np.empty_like(g)
    H_fd = np.empty_like(H)
    for i in range(prob.p):
        e = np.zeros(prob.p)
        e[i] = h
        vp, pp = evaluate_barrier(prob, lam + e, t)
        vm, pm = evaluate_barrier(prob, lam - e, t)
        g_fd[i] = (vp - vm) / (2 * h)
        gp = gradient(prob, pp, derivatives(prob, pp), t)
        gm = gradient(prob, pm, derivatives(prob, pm), t)
        H_fd[:, i] = (gp - gm) / (2 * h)
    assert np.linalg.norm(g - g_fd) <= 1e-5 * (1 + np.linalg.norm(g))
    assert np.linalg.norm(H - H_fd) <= 1e-4 * (1 + np.linalg.norm(H))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_hessian_psd_at_interior_points(seed):
    prob, lam = random_feasible(np.random.default_rng(seed), p=3)
    pair, b = state_at(prob, lam, 1.0)
    H = hessian(prob, pair, b, 1.0)
    assert np.array_equal(H, H.T)
    assert np.linalg.eigvalsh(H)[0] >= -1e-8 * np.linalg.norm(H)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_barrier_convexity(seed):
    rng = np.random.default_rng(seed)
    prob, lam = random_feasible(rng, p=2)
    l1 = lam + 0.05 * rng.standard_normal(prob.p)
    l2 = lam + 0.05 * rng.standard_normal(prob.p)
    try:
        v1, _ = evaluate_barrier(prob, l1, 1.0)
        v2, _ = evaluate_barrier(prob, l2, 1.0)
    except OutOfDomain:
        return
    for a in (0.25, 0.5, 0.75):
        va, _ = evaluate_barrier(prob, a * l1 + (1 - a) * l2, 1.0)
        assert va <= a * v1 + (1 - a) * v2 + 1e-8 * (1 + abs(v1) + abs(v2))


def test_newton_step_examples():
    s = newton_step([-1.5], [[3.75]])
    assert s.direction[0] == pytest.approx(0.4)
    s = newton_step([0.0], [[3.75]])
    assert s.direction[0] == 0.0 and s.decrement == 0.0
    s = newton_step([1.0, 2.0], np.diag([1.0, 4.0]))
    assert np.allclose(s.direction, [-1.0, -0.5])
    assert not s.gradient_fallback


def test_newton_step_gradient_fallback():
    s = newton_step([1.0, 1.0], [[-1.0, 0.0], [0.0, -2.0]])
    assert s.gradient_fallback
    assert np.allclose(s.direction, [-1.0, -1.0])


def test_newton_decrement_definition():
    g = np.array([1.0, -2.0])
    H = np.array([[2.0, 0.5], [0.5, 3.0]])
    s = newton_step(g, H)
    assert s.decrement == pytest.approx(math.sqrt(g @ np.linalg.solve(H, g)))


def test_line_search_decreases_s1():
    prob = s1()
    v0, _ = evaluate_barrier(prob, [1.0], 1.0)
    res = line_search(prob, np.array([1.0]), np.array([0.4]), 1.0, v0, -1.5 * 0.4)
    assert res.value < v0
    # the stage minimizer from the closed form is where the step heads
    lam_star = optimize.brentq(lambda x: 1 - 0.5 / math.sqrt(x) - 2 / x, 0.5, 10)
    assert abs(1.0 + res.alpha * 0.4 - lam_star) < abs(1.0 - lam_star)


def test_line_search_domain_safeguard():
    # at t = 10 the gradient is 10 (1 - 1/2) - 2 = 3; a full step of -1.5 leaves lam > 0
    prob = s1()
    v0, _ = evaluate_barrier(prob, [1.0], 10.0)
    res = line_search(prob, np.array([1.0]), np.array([-1.5]), 10.0, v0, 3.0 * -1.5)
    assert res.alpha < 1.0
    assert res.domain_rejections >= 1
    assert 1.0 - 1.5 * res.alpha > 0
    assert res.value < v0


def test_line_search_zero_direction():
    res = line_search(s1(), np.array([1.0]), np.array([0.0]), 1.0, 0.0, 0.0)
    assert res.alpha == 1.0 and res.probes == 0


def test_line_search_failure_after_budget():
    prob = s1()
    v0, _ = evaluate_barrier(prob, [1.0], 1.0)
    # an ascent direction never satisfies the sufficient decrease test
    with pytest.raises(LineSearchFailed):
        line_search(prob, np.array([1.0]), np.array([-0.1]), 1.0, v0 - 10.0, -1.0,
                    SolverConfig(ls_max_steps=5))


def test_solve_s1_optimum():
    rep = solve(s1(), [1.0], SolverConfig(t_max=1e6))
    assert rep.status == "optimal"
    # minimizer of lam - sqrt(lam)
    assert rep.lambda_opt[0] == pytest.approx(0.25, abs=1e-4)
    assert rep.objective == pytest.approx(-0.25, abs=1e-4)
    assert rep.newton_iters_total > 0
    assert rep.riccati_solves >= rep.newton_iters_total
    assert rep.history and all(h.converged for h in rep.history)


def test_solve_s1_boundary_infimum():
    rep = solve(s1(sigma=0.0), [1.0], SolverConfig(t_max=1e6))
    assert rep.status == "optimal"
    assert 0.0 < rep.lambda_opt[0] < 1e-4
    assert rep.objective == pytest.approx(0.0, abs=1e-4)


def test_solve_infeasible_start():
    rep = solve(s1(), [-1.0])
    assert rep.status == "domain_error"


def test_stage_values_do_not_increase():
    prob, lam = random_feasible(np.random.default_rng(21), p=2)
    rep = solve(prob, lam, SolverConfig(t_max=1e3))
    assert rep.status == "optimal"
    for h in rep.history:
        assert h.converged


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(t0=10.0, t_max=1.0)
    with pytest.raises(ValueError):
        SolverConfig(t_factor=1.0)
    with pytest.raises(ValueError):
        SolverConfig(ls_backtrack=1.0)


def test_iterate_state_consistency():
    prob, lam = random_feasible(np.random.default_rng(4), p=2)
    pair = compute_pair(prob, lam)
    st_ = iterate_state(prob, pair, 2.0)
    v, _ = evaluate_barrier(prob, lam, 2.0)
    assert st_.v == pytest.approx(v)
    assert st_.newton_decrement >= 0.0


def test_phase1_problem_shapes():
    aug = phase1_problem(s1())
    assert aug.p == 2
    Q, S, R, N = aug.evaluate([2.0, 1.0])
    assert Q[0, 0] == pytest.approx(-3.0)
    assert R[0, 0] == pytest.approx(-3.0)
    assert N[0, 0] == pytest.approx(3.0)
    assert list(aug.c) == [1.0, 0.0]


def test_phase1_feasible_s1():
    lam = phase1(s1())
    assert isinstance(lam, np.ndarray)
    assert feasibility_margins(s1(), lam).interior


def test_phase1_infeasible_s1():
    cert = phase1(infeasible_s1())
    assert isinstance(cert, InfeasibleCertificate)
    assert cert.lambda0 >= 0.0


@pytest.mark.parametrize("seed", range(5))
def test_phase1_random_feasible(seed):
    prob, _ = random_feasible(np.random.default_rng(500 + seed))
    lam = phase1(prob)
    assert isinstance(lam, np.ndarray)
    assert feasibility_margins(prob, lam).interior


def test_two_strategies_give_same_solution():
    prob, lam = random_feasible(np.random.default_rng(8), p=2)
    a = solve(prob, lam, SolverConfig(t_max=1e4))
    b = solve(prob, lam, SolverConfig(t_max=1e4, strategy="two_solves"))
    assert a.objective == pytest.approx(b.objective, rel=1e-6, abs=1e-8)
