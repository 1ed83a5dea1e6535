from dataclasses import replace

import numpy as np
import pytest

from drmlsad.core import (DrMlsadProblem, PrimalDualIterate, Status, build_scenario_model,
                          kkt_residuals)
from drmlsad.jacobian import l1_prox_jacobian, projC_hs_jacobian
from drmlsad.oracle import lp_reference_solve
from drmlsad.ppdssn import (PpaState, SsnConfig, adapt_parameters, augmented_gap,
                            newton_system_solve, ppa_solve, primal_value, psi_grad,
                            psi_value, ssn_solve)
from drmlsad.prox import moreau_env_indicator_C, moreau_env_l1, project_C

from conftest import synthetic_problem


def _state(prob, rng, sigma=None, gamma=None):
    m, n = prob.A.shape[1], prob.A.shape[0]
    x = project_C(rng.standard_normal(m), prob.constraint_set)
    return PpaState(sigma or rng.uniform(0.5, 10), gamma or 10 ** rng.uniform(0, 6), x,
                    prob.A @ x - prob.epsilon, np.zeros(n))


def _psi_from_envelopes(u, st, prob):
    A, eps, s, g = prob.A, prob.epsilon, st.sigma, st.gamma
    n = A.shape[0]
    zh = st.x + s * A.T @ u
    c = A @ st.x - eps
    w = c - g * (1 / (2 * n) + u)
    # gamma * envelope of (1/2N)||.||_1 with parameter gamma
    env_l1 = moreau_env_l1(w, g / (2 * n)) / g
    return (-moreau_env_indicator_C(zh, s, prob.constraint_set) + zh @ zh / (2 * s)
            - st.x @ st.x / (2 * s) - env_l1 + w @ w / (2 * g) - c @ c / (2 * g)
            - eps * (1 + u.sum()))


def test_psi_matches_envelope_form():
    rng = np.random.default_rng(0)
    prob = synthetic_problem(1, epsilon=0.05)
    for _ in range(20):
        st = _state(prob, rng)
        u = rng.standard_normal(prob.A.shape[0]) * 0.02
        ref = _psi_from_envelopes(u, st, prob)
        assert psi_value(u, st, prob) == pytest.approx(ref, rel=1e-9, abs=1e-9)


def test_gradient_finite_differences():
    rng = np.random.default_rng(1)
    prob = synthetic_problem(2, epsilon=0.05)
    for _ in range(20):
        st = _state(prob, rng)
        u = rng.standard_normal(prob.A.shape[0]) * 0.02
        d = rng.standard_normal(u.size)
        h = 1e-6
        fd = (psi_value(u + h * d, st, prob) - psi_value(u - h * d, st, prob)) / (2 * h)
        an = psi_grad(u, st, prob) @ d
        assert abs(fd - an) <= 1e-6 * max(1.0, abs(an))


def test_gradient_zero_when_data_constant():
    prob = DrMlsadProblem(build_scenario_model(np.ones((4, 3))), 0.0, -np.inf)
    st = PpaState(1.0, 1.0, np.full(3, 1 / 3), np.zeros(4), np.zeros(4))
    np.testing.assert_array_equal(psi_grad(np.zeros(4), st, prob), 0.0)


def test_newton_solve_identity_case():
    A = np.zeros((3, 2))
    j = projC_hs_jacobian(np.array([0.5, 0.5]), replace_cset(2))
    r = np.array([1.0, -2.0, 3.0])
    d = newton_system_solve((A, j, l1_prox_jacobian(np.zeros(3), 1.0), 1.0, 1.0), 1.0, r,
                            SsnConfig())
    np.testing.assert_allclose(d, r)


def replace_cset(m):
    from drmlsad.prox import HalfspaceSimplex
    return HalfspaceSimplex(np.ones(m), -np.inf)


def test_cg_and_cholesky_agree():
    rng = np.random.default_rng(5)
    prob = synthetic_problem(3, n=500, m=40, epsilon=0.05)
    st = _state(prob, rng, sigma=5.0, gamma=100.0)
    n = prob.A.shape[0]
    u = rng.standard_normal(n) * 0.01
    zh = st.x + st.sigma * prob.A.T @ u
    j = projC_hs_jacobian(zh, prob.constraint_set)
    w = prob.A @ st.x - prob.epsilon - st.gamma * (1 / (2 * n) + u)
    uj = l1_prox_jacobian(w, st.gamma / (2 * n))
    rhs = rng.standard_normal(n)
    parts = (prob.A, j, uj, st.sigma, st.gamma)
    d_chol = newton_system_solve(parts, 1e-3, rhs, SsnConfig())
    d_cg = newton_system_solve(parts, 1e-3, rhs, SsnConfig(cg_switch_n=0, cg_rtol=1e-14))
    np.testing.assert_allclose(d_cg, d_chol, rtol=1e-8, atol=1e-8 * np.abs(d_chol).max())


def test_ssn_hand_instance(hand_problem):
    x = np.array([0.3, 0.7])
    st = PpaState(7.6, 9400.0, x, hand_problem.A @ x - 0.1, np.zeros(2))
    u, j = ssn_solve(np.zeros(2), st, hand_problem, SsnConfig(), tol_inner=1e-10)
    assert np.linalg.norm(psi_grad(u, st, hand_problem)) <= 1e-10
    assert j <= 10
    # starting at the optimum takes no step
    u2, j2 = ssn_solve(u, st, hand_problem, SsnConfig(), tol_inner=1e-10)
    assert j2 == 0 and np.array_equal(u2, u)


def test_ssn_armijo_and_descent_logged():
    rng = np.random.default_rng(7)
    prob = synthetic_problem(4, epsilon=0.03)
    st = _state(prob, rng, sigma=7.6, gamma=9400.0)
    trace = []
    u, j = ssn_solve(np.zeros(prob.A.shape[0]), st, prob, SsnConfig(), tol_inner=1e-9,
                     trace=trace)
    psis = [psi_value(np.zeros(prob.A.shape[0]), st, prob)] + [r["psi"] for r in trace]
    assert all(b <= a + 1e-12 for a, b in zip(psis, psis[1:]))
    assert trace[-1]["grad_norm"] <= 1e-9


def test_gap_is_nonnegative_and_vanishes_at_inner_optimum():
    rng = np.random.default_rng(8)
    for seed in range(5):
        prob = synthetic_problem(seed, n=30, m=8, epsilon=0.03)
        st = _state(prob, rng, sigma=2.0, gamma=50.0)
        u0 = np.zeros(prob.A.shape[0])
        x0 = project_C(st.x + st.sigma * prob.A.T @ u0, prob.constraint_set)
        assert augmented_gap(PrimalDualIterate(x0, None, u0), u0, st, prob) >= -1e-10
        u, _ = ssn_solve(u0, st, prob, SsnConfig(), tol_inner=1e-12)
        xp = project_C(st.x + st.sigma * prob.A.T @ u, prob.constraint_set)
        gap = augmented_gap(PrimalDualIterate(xp, None, u), u, st, prob)
        assert -1e-10 <= gap <= 1e-8


def test_adapt_parameters_branches():
    st = PpaState(1.0, 100.0, np.zeros(2), np.zeros(2), np.zeros(2))
    a = adapt_parameters(st, 1e-4, 2e-4, 1e-3)  # res1 <= res2, s2 > s1
    assert (a.sigma, a.gamma) == (pytest.approx(0.9), pytest.approx(120.0))
    b = adapt_parameters(st, 1e-3, 1e-3, 1e-3)  # res1 <= res2, s2 == s1
    assert (b.sigma, b.gamma) == (pytest.approx(0.95), pytest.approx(130.0))
    c = adapt_parameters(st, 1e-3, 1e-3, 1e-4)  # otherwise, nothing listed holds
    assert (c.sigma, c.gamma) == (pytest.approx(1.01), pytest.approx(2e6))
    d = adapt_parameters(st, 1e-3, 1e-4, 1e-4)  # s2 < s1, s1 > 1.5 res2
    assert d.sigma == pytest.approx(1.02)
    tiny = PpaState(1e-3, 1e6, np.zeros(2), np.zeros(2), np.zeros(2))
    e = adapt_parameters(tiny, 1e-4, 2e-4, 1e-3)
    assert e.sigma == 1e-3 and e.gamma == 1e6


def test_ppa_hand_instance(hand_problem):
    it, rep = ppa_solve(hand_problem, tol=1e-10)
    assert rep.status is Status.CONVERGED
    assert rep.objective == pytest.approx(0.1, abs=1e-10)
    assert 0.4 <= it.x[0] <= 0.6 and rep.kkt_residual <= 1e-10


def test_ppa_from_poor_start_hand_instance(hand_problem):
    it, rep = ppa_solve(hand_problem, tol=1e-10, x0=[1.0, 0.0], u0=[0.3, -0.2])
    assert rep.objective == pytest.approx(0.1, abs=1e-9)
    assert 0.4 <= it.x[0] <= 0.6


@pytest.mark.parametrize("stopping", ["kkt", "gap"])
def test_ppa_matches_lp(stopping):
    for seed in range(3):
        prob = synthetic_problem(seed, n=40, m=10, epsilon=0.02)
        it, rep = ppa_solve(prob, tol=1e-8, cfg=SsnConfig(stopping=stopping))
        _, f_lp = lp_reference_solve(prob)
        assert rep.status is Status.CONVERGED
        assert max(kkt_residuals(it, prob)) <= 1e-8
        assert rep.objective == pytest.approx(f_lp, rel=1e-6)
        assert prob.constraint_set.contains(it.x, 1e-10)


def test_algorithm_regularization_rule():
    prob = synthetic_problem(1, n=40, m=10, epsilon=0.02)
    _, rep = ppa_solve(prob, tol=1e-7, cfg=SsnConfig(reg_rule="algorithm"))
    _, f_lp = lp_reference_solve(prob)
    assert rep.objective == pytest.approx(f_lp, rel=1e-5)


def test_iteration_limit_status():
    prob = synthetic_problem(0, epsilon=0.0)
    _, rep = ppa_solve(prob, tol=1e-12, max_outer=2)
    assert rep.status is Status.ITER_LIMIT and rep.outer_iterations == 2


def test_config_validation():
    with pytest.raises(ValueError):
        SsnConfig(vartheta=0.7)
    with pytest.raises(ValueError):
        SsnConfig(reg_rule="other")
    with pytest.raises(ValueError):
        PpaState(0.0, 1.0, np.zeros(1), np.zeros(1), np.zeros(1))
