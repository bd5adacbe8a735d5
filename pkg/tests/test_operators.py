import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from stochlq.errors import NotAdmissible
from stochlq.operators import (build_F, certify, closed_loop_matrix, expect_quadratic, gamma_map,
                               is_admissible, lyapunov_residuals, pi_map, solve_P, solve_sigma,
                               stage_weight)
from stochlq.params import InitDist, ScenarioSet

from corpus import lowdim, problems, random_admissible, random_atoms, scalar


def per_atom_F(S, L):
    M = 0
    for p, A, B in zip(S.prob, S.A, S.B):
        K = A - B @ L
        M = M + p * np.kron(K, K)
    return M


def test_F_matches_per_atom_oracle():
    for prob, sol in problems():
        S = prob.model.scenarios
        for L in random_admissible(prob, sol, 3, 0) + [np.zeros_like(sol.L_star)]:
            np.testing.assert_allclose(closed_loop_matrix(S, L), per_atom_F(S, L), atol=1e-13)


def test_F_apply_is_covariance_propagation():
    prob, sol = random_atoms(0)
    S = prob.model
    F = build_F(S, sol.L_star)
    X = np.arange(9.0).reshape(3, 3)
    direct = sum(p * (A - B @ sol.L_star) @ X @ (A - B @ sol.L_star).T for p, A, B in zip(S.prob, S.A, S.B))
    np.testing.assert_allclose(F.apply(X), direct, atol=1e-13)
    directT = sum(p * (A - B @ sol.L_star).T @ X @ (A - B @ sol.L_star) for p, A, B in zip(S.prob, S.A, S.B))
    np.testing.assert_allclose(F.adjoint(X), directT, atol=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_adjoint_identity(seed):
    prob, sol = lowdim()
    rng = np.random.default_rng(seed)
    L = sol.L_star + 0.2 * rng.normal(size=sol.L_star.shape)
    F = build_F(prob.model, L)
    X, Y = rng.normal(size=(2, 3, 3))
    assert np.sum(F.apply(X) * Y) == pytest.approx(np.sum(X * F.adjoint(Y)), rel=1e-12, abs=1e-12)


def test_scalar_closed_forms():
    for Lv in (0.3, 0.7, 1.0, 1.6):
        p = scalar()
        a = (1 - Lv) ** 2
        c = certify(p.model, p.init, [[Lv]])
        assert c.rho == pytest.approx(a, abs=1e-15)
        assert c.P[0, 0] == pytest.approx((1 + Lv ** 2) / (1 - a), rel=1e-13)
        assert c.Sigma[0, 0] == pytest.approx(1 / (1 - a), rel=1e-13)
        # d/dL (1+L^2)/(1-(1-L)^2)
        num, den = 1 + Lv ** 2, 1 - a
        g = (2 * Lv * den - num * 2 * (1 - Lv)) / den ** 2
        assert c.grad[0, 0] == pytest.approx(g, rel=1e-12, abs=1e-12)


def test_scalar_two_atom_ms_stability():
    one = np.ones((2, 1, 1))
    # E[A^2] = (0.25 + 1.69)/2 = 0.97: mean-square stable though one atom is expanding
    S = ScenarioSet([0.5, 0.5], [[[0.5]], [[1.3]]], one * 0, one, one)
    F = build_F(S, [[0.0]])
    assert F.rho == pytest.approx(0.97)
    assert is_admissible(F)
    c = certify(S, InitDist.pointmass([1.0]), [[0.0]])
    assert c.cost == pytest.approx(1 / 0.03, rel=1e-12)


def test_deterministic_matches_scipy_lyapunov():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(4, 4)) * 0.3
    B = rng.normal(size=(4, 2))
    S = ScenarioSet.deterministic(A, B, np.eye(4), np.eye(2))
    L = np.zeros((2, 4))
    assert max(abs(np.linalg.eigvals(A))) < 1
    P = solve_P(S, L)
    np.testing.assert_allclose(P, sla.solve_discrete_lyapunov(A.T, np.eye(4)), atol=1e-12)
    Sig0 = np.diag([1.0, 2, 3, 4])
    Sg = solve_sigma(build_F(S, L), Sig0)
    np.testing.assert_allclose(Sg, sla.solve_discrete_lyapunov(A, Sig0), atol=1e-12)


def test_non_admissible_raises():
    p = scalar(A=2.0, B=0.0)
    F = build_F(p.model, [[0.0]])
    assert not is_admissible(F)
    with pytest.raises(NotAdmissible):
        certify(p.model, p.init, [[0.0]])
    with pytest.raises(NotAdmissible):
        solve_P(p.model, [[0.0]])
    # boundary: rho exactly 1
    q = scalar(A=1.0, B=1.0)
    assert not is_admissible(build_F(q.model, [[0.0]]))


def test_policy_shape_validation():
    prob, _ = lowdim()
    with pytest.raises(ValueError):
        build_F(prob.model, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        build_F(prob.model, np.full((2, 3), np.nan))


def test_certificate_identities_on_corpus():
    for prob, sol in problems():
        for L in random_admissible(prob, sol, 5, 1):
            c = certify(prob.model, prob.init, L)
            rP, rS = lyapunov_residuals(prob.model, prob.init, c)
            assert rP <= 1e-10 and rS <= 1e-10
            alt = np.sum(c.Sigma * stage_weight(prob.model, L))
            assert abs(alt - c.cost) <= 1e-9 * c.cost
            assert np.all(np.linalg.eigvalsh(c.P) > 0)
            assert np.all(np.linalg.eigvalsh(c.Sigma) > 0)


def test_gradient_matches_finite_differences():
    prob, sol = random_atoms(0)
    L = random_admissible(prob, sol, 1, 5)[0]
    c = certify(prob.model, prob.init, L)
    h = 1e-6
    fd = np.zeros_like(L)
    for idx in np.ndindex(*L.shape):
        E = np.zeros_like(L)
        E[idx] = h
        fd[idx] = (certify(prob.model, prob.init, L + E).cost - certify(prob.model, prob.init, L - E).cost) / (2 * h)
    assert np.linalg.norm(fd - c.grad) <= 1e-6 * np.linalg.norm(c.grad)


def test_expect_quadratic_per_atom():
    prob, _ = random_atoms(1, k=3, n=2, m=1)
    S = prob.model
    K = np.array([[2.0, 0.3], [0.3, 1.0]])
    got = expect_quadratic(S, K)
    want = (sum(p * A.T @ K @ A for p, A in zip(S.prob, S.A)),
            sum(p * A.T @ K @ B for p, A, B in zip(S.prob, S.A, S.B)),
            sum(p * B.T @ K @ A for p, A, B in zip(S.prob, S.A, S.B)),
            sum(p * B.T @ K @ B for p, B in zip(S.prob, S.B)))
    for a, b in zip(got, want):
        np.testing.assert_allclose(a, b, atol=1e-14)


def test_pi_and_gamma_maps():
    rng = np.random.default_rng(0)
    G = rng.normal(size=(5, 5))
    P = G @ G.T + np.eye(5)
    Pxx, Pxu, Puu = P[:3, :3], P[:3, 3:], P[3:, 3:]
    np.testing.assert_allclose(pi_map(P, 3), Pxx - Pxu @ np.linalg.solve(Puu, Pxu.T), atol=1e-12)
    np.testing.assert_allclose(gamma_map(P, 3), -np.linalg.solve(Puu, Pxu.T), atol=1e-12)
    # singular P_uu falls back to the pseudo-inverse
    Z = np.zeros((3, 3))
    Z[0, 0] = 1.0
    np.testing.assert_array_equal(pi_map(Z, 1), [[1.0]])
    np.testing.assert_array_equal(gamma_map(Z, 1), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        pi_map(P, 5)


def test_sigma_and_cost_scale_with_initial_second_moment():
    prob, sol = random_atoms(0)
    c1 = certify(prob.model, prob.init, sol.L_star)
    c2 = certify(prob.model, prob.init.scaled(2.0), sol.L_star)
    assert c2.cost == pytest.approx(2 * c1.cost, rel=1e-12)
    np.testing.assert_allclose(c2.Sigma, 2 * c1.Sigma, rtol=1e-12)
    np.testing.assert_allclose(c2.P, c1.P, atol=1e-12)
