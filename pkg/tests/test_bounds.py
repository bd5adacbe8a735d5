import dataclasses
import math

import numpy as np
import pytest

from stochlq.bounds import (bernstein_tail, bounds_for, centered_exp_moment, compute_bounds, h1, h_c,
                            h_delta, h_grad, h_l, h_l_sigma, h_l_tilde, M_grad, policy_stats,
                            random_opnorm_directions, sigma_perturb_coeff, verify_admissibility_radius,
                            verify_bernstein)
from stochlq.errors import MissingMoment
from stochlq.operators import build_F, certify, is_admissible
from stochlq.params import summarize
from stochlq.rng import stream
from stochlq.rollout import cost_tail_exact, sigma_finite_exact

from corpus import lowdim, problems, random_admissible


def corpus_policies(k=3, seed=0):
    for prob, sol in problems():
        s = summarize(prob.model, prob.init)
        for L in [sol.L_star] + random_admissible(prob, sol, k, seed, scale=0.4):
            yield prob, sol, s, L, policy_stats(prob.model, prob.init, L, sol)


def perturbations(L, radius, k, seed):
    D = random_opnorm_directions(*L.shape, k, stream(seed, "test-perturb", 0))
    scale = stream(seed, "test-perturb", 1).uniform(0, 1, k)
    return [L + radius * a * d for a, d in zip(scale, D)]


def test_h_delta_ball_is_admissible():
    for prob, sol, s, L, p in corpus_policies():
        assert verify_admissibility_radius(prob.model, prob.init, L, 100, seed=1, sol=sol) == 1.0


def test_cost_and_sigma_perturbation_bounds():
    for prob, sol, s, L, p in corpus_policies():
        D = h_delta(s, p)
        c = certify(prob.model, prob.init, L)
        hc, coeff, hg = h_c(s, p, D), sigma_perturb_coeff(s, p), h_grad(s, p, D)
        for L2 in perturbations(L, D, 10, 2):
            c2 = certify(prob.model, prob.init, L2)
            d = np.linalg.norm(L2 - L, 2)
            assert abs(c2.cost - c.cost) <= hc * c.cost * d * (1 + 1e-9)
            assert np.linalg.norm(c2.Sigma - c.Sigma, 2) <= coeff * d * (1 + 1e-9)
            assert np.linalg.norm(c2.grad - c.grad, 2) <= hg * d * (1 + 1e-9)


def test_horizon_thresholds_guarantee_gaps():
    for prob, sol, s, L, p in corpus_policies(k=2):
        Sig = certify(prob.model, prob.init, L).Sigma
        for eps in (1e-1, 1e-2, 1e-3):
            l = math.ceil(h_l(s, p, eps))
            assert cost_tail_exact(prob.model, prob.init, L, l) <= eps
            ls = math.ceil(h_l_sigma(s, p, eps))
            assert np.linalg.norm(Sig - sigma_finite_exact(prob.model, prob.init, L, ls), 2) <= eps


def test_perturbed_horizon_covers_sphere():
    prob, sol = lowdim()
    s = summarize(prob.model, prob.init)
    L = sol.L_star
    p = policy_stats(prob.model, prob.init, L, sol)
    r, e = 0.1, 1e-2
    l = math.ceil(h_l_tilde(s, p, e, r))
    g = stream(0, "tilde", 0)
    for _ in range(20):
        U = g.standard_normal(L.shape)
        U *= r / np.linalg.norm(U)
        assert cost_tail_exact(prob.model, prob.init, L + U, l) <= e


def test_gradient_norm_bounds():
    for prob, sol, s, L, p in corpus_policies():
        g = certify(prob.model, prob.init, L).grad
        assert np.linalg.norm(g) <= h1(s, p) * (1 + 1e-9) + 1e-10
        assert np.linalg.norm(g) <= M_grad(s, p.C, sol.cost_star) * (1 + 1e-9) + 1e-10


def test_report_fields_positive_and_serializable():
    prob, sol = lowdim()
    rep = bounds_for(prob.model, prob.init, prob.start(), sol)
    d = rep.to_dict()
    for k, v in d.items():
        if isinstance(v, float):
            assert v >= 0 and np.isfinite(v), k
    assert d["h_l_tilde"] > d["h_l"] > 0
    assert rep.h_s_total >= rep.h_s


def test_missing_moment_is_reported():
    prob, sol = lowdim()
    s = dataclasses.replace(summarize(prob.model, prob.init), Ex02=float("nan"))
    p = policy_stats(prob.model, prob.init, sol.L_star, sol)
    with pytest.raises(MissingMoment):
        h_c(s, p, 0.1)
    with pytest.raises(MissingMoment):
        compute_bounds(s, p)


def test_centered_exponential_is_subexponential():
    for p in (1, 2, 3, 5, 8):
        assert centered_exp_moment(p) <= p
    assert centered_exp_moment(2) == pytest.approx(1.0, rel=1e-8)


def test_bernstein_bound_small_grid():
    rows = verify_bernstein(1.0, 0.5, [50, 400], [0.05, 0.2], 2000, seed=3)
    assert all(r["ok"] for r in rows)
    assert bernstein_tail(0.1, 100, 0.5, 1.0, 2, 2) > bernstein_tail(0.1, 1000, 0.5, 1.0, 2, 2)


def test_radius_boundary_fails_far_outside():
    prob, sol = lowdim()
    # a radius large enough that most perturbations leave the admissible set
    frac = verify_admissibility_radius(prob.model, prob.init, sol.L_star, 50, seed=0, radius=5.0)
    assert frac < 1.0
    assert not is_admissible(build_F(prob.model, sol.L_star + 5.0 * np.ones_like(sol.L_star)))
