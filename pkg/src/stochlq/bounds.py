"""Explicit perturbation, finite-horizon and concentration constants.

Notation for moments follows ``ModelSummary``: EB2 = E||B||^2,
EAB = E[||A|| ||B||], ER = E||R||, Ex02 = E||x0||^2; ``abs_cl`` is
E||A - BL||^2 for the policy at hand.  All norms are spectral unless
marked Frobenius.  Only constants without unspecified absolute factors
are provided.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import MissingMoment
from .operators import ValueCert, build_F, certify, closed_loop_norm_sq, is_admissible
from .params import InitDist, ModelSummary, summarize
from .riccati import AreSolution
from .rng import stream

E = math.e


@dataclass(frozen=True)
class PolicyStats:
    """Per-policy inputs to the bound formulas."""
    C: float
    C_star: float
    L_norm: float
    RL_norm: float
    abs_cl: float
    m: int
    n: int


def policy_stats(model, init: InitDist, L, sol: AreSolution, cert: ValueCert | None = None) -> PolicyStats:
    cert = cert if cert is not None else certify(model, init, L)
    m, n = cert.L.shape
    return PolicyStats(cert.cost, sol.cost_star, float(np.linalg.norm(cert.L, 2)),
                       float(np.linalg.norm(cert.R_L, 2)), closed_loop_norm_sq(model, cert.L), m, n)


def _need(s: ModelSummary, *names):
    for nm in names:
        v = getattr(s, nm, None)
        if v is None or not np.isfinite(v):
            raise MissingMoment(f"summary field {nm} is unavailable")


def _pert(s: ModelSummary, p: PolicyStats) -> float:
    """sqrt(E||B||^2) (1 + sqrt(E||A-BL||^2))."""
    return math.sqrt(s.EB2) * (1.0 + math.sqrt(p.abs_cl))


def h_delta(s: ModelSummary, p: PolicyStats) -> float:
    """Operator-norm radius around L that stays admissible."""
    return s.sigma_Q * s.mu / (4.0 * _pert(s, p) * p.C)


def sigma_perturb_coeff(s: ModelSummary, p: PolicyStats) -> float:
    """||Sigma_L' - Sigma_L|| <= coeff * ||L' - L|| inside the h_delta ball."""
    return 4.0 * (p.C / s.sigma_Q) ** 2 * _pert(s, p) / s.mu


def _bracket(s: ModelSummary, p: PolicyStats, Delta: float) -> float:
    Qn = float(np.linalg.norm(s.Qbar, 2))
    return (2.0 * s.ER * (Delta + 2.0 * p.L_norm)
            + 4.0 * p.C / (s.mu * s.sigma_Q) * _pert(s, p) * (Qn + s.ER * p.L_norm ** 2))


def h_c(s: ModelSummary, p: PolicyStats, Delta: float) -> float:
    """|C(L') - C(L)| <= h_c * C(L) * ||L' - L||."""
    _need(s, "Ex02", "ER")
    return s.Ex02 / (s.mu * s.sigma_Q) * _bracket(s, p, Delta)


def h_grad(s: ModelSummary, p: PolicyStats, Delta: float) -> float:
    """||grad C(L') - grad C(L)|| <= h_grad * ||L' - L||."""
    _need(s, "EAB", "EB2", "ER")
    C, sQ, mu = p.C, s.sigma_Q, s.mu
    Rn = float(np.linalg.norm(s.Rbar, 2))
    inner = ((s.EAB + s.EB2 * (Delta + p.L_norm)) * C / (mu * sQ) * _bracket(s, p, Delta)
             + Rn + s.EB2 * C / mu)
    tail = 8.0 * math.sqrt(p.RL_norm / mu * max(C - p.C_star, 0.0)) * (C / sQ) ** 2 * _pert(s, p) / mu
    return 4.0 * C / sQ * inner + tail


def h_grad_hat(s: ModelSummary, p: PolicyStats, Delta: float) -> float:
    return math.sqrt(min(p.m, p.n)) * h_grad(s, p, Delta)


def h_l_sigma(s: ModelSummary, p: PolicyStats, eps: float) -> float:
    """Horizon after which ||Sigma_L - Sigma_L^(l)|| <= eps."""
    return p.n * p.C ** 2 / (eps * s.mu * s.sigma_Q ** 2)


def h_l(s: ModelSummary, p: PolicyStats, eps: float) -> float:
    """Horizon after which C(L) - C^(l)(L) <= eps."""
    Qn = float(np.linalg.norm(s.Qbar, 2))
    return p.n * p.C ** 2 * (Qn + s.ER * p.L_norm ** 2) / (eps * s.mu * s.sigma_Q ** 2)


def h_l_tilde(s: ModelSummary, p: PolicyStats, e: float, r: float) -> float:
    """Horizon after which C(L + U) - C^(l)(L + U) <= e for every ||U||_F <= r."""
    Qn = float(np.linalg.norm(s.Qbar, 2))
    return 2.0 * p.n * p.C * (Qn + s.ER * (p.L_norm + r) ** 2) / (e * s.mu * s.sigma_Q ** 2)


def h_r(s: ModelSummary, p: PolicyStats, eps: float, Delta: float) -> float:
    return min(Delta, 1.0 / h_c(s, p, Delta), eps / h_grad_hat(s, p, Delta))


def h1(s: ModelSummary, p: PolicyStats) -> float:
    """Upper bound on ||grad C(L)||_F."""
    return 2.0 * p.C / s.sigma_Q * math.sqrt(p.RL_norm / s.mu * max(p.C - p.C_star, 0.0))


def b0(s: ModelSummary, p: PolicyStats, e: float, r: float) -> float:
    return 2 * p.m * p.n * p.C / r + e + h1(s, p)


def var0(s: ModelSummary, p: PolicyStats, e: float, r: float) -> float:
    return (2 * p.m * p.n * p.C / r) ** 2 + (e + h1(s, p)) ** 2


def h_s(s: ModelSummary, p: PolicyStats, e: float, delta: float, r: float) -> float:
    """Samples so that the infinite-horizon estimator is e-accurate w.p. 1 - delta."""
    k = min(p.m, p.n)
    return (2 * k / e ** 2 * (var0(s, p, e, r) + e * b0(s, p, e, r) / math.sqrt(k))
            * math.log(2 * (p.m + p.n) / delta))


def _K(s: ModelSummary) -> float:
    _need(s, "bound_K", "sigma0", "x0_mean_norm")
    return s.bound_K


def sigma_t(s: ModelSummary, L_norm: float, t: int) -> float:
    return (4 * _K(s) * (1 + L_norm)) ** t * (s.sigma0 + 2 * s.x0_mean_norm)


def beta_t(s: ModelSummary, L_norm: float, t: int) -> float:
    return 16 * (sigma_t(s, L_norm, t) ** 2 + (_K(s) * (1 + L_norm)) ** (2 * t) * s.Ex02)


def gamma_t(s: ModelSummary, L_norm: float, t: int, M_norm: float) -> float:
    return 4 * M_norm * (s.n * beta_t(s, L_norm, t) + ((1 + L_norm) * _K(s)) ** (2 * t) * s.Ex02)


def sigma_tilde(s: ModelSummary, L_norm: float, l: int, r: float) -> float:
    return (4 * (1 + r + L_norm) * _K(s)) ** l * (s.sigma0 + 2 * s.x0_mean_norm)


def beta_tilde(s: ModelSummary, L_norm: float, l: int, r: float) -> float:
    return 16 * (sigma_tilde(s, L_norm, l, r) ** 2 + (_K(s) * (1 + r + L_norm)) ** (2 * l) * s.Ex02)


def gamma_tilde(s: ModelSummary, L_norm: float, l: int, r: float) -> float:
    K = _K(s)
    return (4 * K * (1 + (L_norm + r) ** 2)
            * (s.n * beta_tilde(s, L_norm, l, r) + ((1 + r + L_norm) * K) ** (2 * l) * s.Ex02))


def h_s_hf(s: ModelSummary, p: PolicyStats, eps: float, delta: float, l: int, r: float) -> float:
    """Samples so that the finite-horizon estimator concentrates around its mean."""
    k = min(p.m, p.n)
    mnl = p.m * p.n * l
    g = gamma_tilde(s, p.L_norm, l, r)
    return (2 * mnl ** 2 * k / (eps ** 2 * r ** 2)
            * ((2 * E * g) ** 2 + eps / (mnl * math.sqrt(k)) * (2 * E * r * g))
            * math.log(2 * (p.m + p.n) * l / delta))


def h_s_total(s: ModelSummary, p: PolicyStats, eps: float, delta: float, l: int, r: float) -> float:
    return max(h_s(s, p, eps / 8, delta / 2, r), h_s_hf(s, p, eps / 2, delta / 2, l, r))


def M_RL(s: ModelSummary, gamma: float) -> float:
    return float(np.linalg.norm(s.Rbar, 2)) + s.EB2 * gamma / s.mu


def M_grad(s: ModelSummary, gamma: float, C_star: float) -> float:
    return 2 * gamma / s.sigma_Q * math.sqrt(M_RL(s, gamma) / s.mu * max(gamma - C_star, 0.0))


def M_L(s: ModelSummary, gamma: float, C_star: float) -> float:
    return (math.sqrt(M_RL(s, gamma) / s.mu * max(gamma - C_star, 0.0)) + s.EAB * gamma / s.mu) / s.sigma_R


def M_ABL(s: ModelSummary, gamma: float, C_star: float) -> float:
    return 2 * (s.EA2 + s.EB2 * M_L(s, gamma, C_star) ** 2)


def bernstein_tail(eps: float, N: int, r: float, gamma: float, m: int, n: int) -> float:
    """Bound on P(||(1/N) sum xi_i U_i|| >= eps)."""
    a = 2 * E * r * gamma
    return 2 * (m + n) * math.exp(-eps ** 2 * N / (2 * (eps * a + a ** 2)))


@dataclass(frozen=True)
class BoundsReport:
    cost: float
    cost_star: float
    L_norm: float
    abs_cl: float
    Delta: float
    t: int
    l: int
    eps: float
    delta: float
    r: float
    h_delta: float
    sigma_perturb_coeff: float
    h_c: float
    h_grad: float
    h_grad_hat: float
    h_l_sigma: float
    h_l: float
    h_l_tilde: float
    h_r: float
    h1: float
    b0: float
    var0: float
    h_s: float
    sigma_t: float
    beta_t: float
    gamma_t: float
    sigma_tilde: float
    beta_tilde: float
    gamma_tilde: float
    h_s_hf: float
    h_s_total: float
    M_RL: float
    M_grad: float
    M_L: float
    M_ABL: float
    bernstein_tail: float
    N: int
    notes: str = "bound_K is the max over quadrature atoms and noise-box vertices"

    def to_dict(self) -> dict:
        return asdict(self)


def compute_bounds(s: ModelSummary, p: PolicyStats, *, t: int = 1, l: int = 30, eps: float = 0.1,
                   delta: float = 0.05, r: float = 0.1, N: int = 500, Delta: float | None = None,
                   gamma: float | None = None, M_norm: float | None = None) -> BoundsReport:
    """Evaluate every constant at one policy.

    ``Delta`` defaults to h_delta, ``gamma`` (sublevel value) to C(L), and
    ``M_norm`` (quadratic form in gamma_t) to ||Q_bar|| + E||R|| ||L||^2.
    """
    hd = h_delta(s, p)
    D = hd if Delta is None else Delta
    g = p.C if gamma is None else gamma
    Mn = float(np.linalg.norm(s.Qbar, 2)) + s.ER * p.L_norm ** 2 if M_norm is None else M_norm
    e8 = eps / 8
    return BoundsReport(
        cost=p.C, cost_star=p.C_star, L_norm=p.L_norm, abs_cl=p.abs_cl, Delta=D, t=t, l=l, eps=eps,
        delta=delta, r=r, h_delta=hd, sigma_perturb_coeff=sigma_perturb_coeff(s, p), h_c=h_c(s, p, D),
        h_grad=h_grad(s, p, D), h_grad_hat=h_grad_hat(s, p, D), h_l_sigma=h_l_sigma(s, p, eps),
        h_l=h_l(s, p, eps), h_l_tilde=h_l_tilde(s, p, r * eps / (4 * p.m * p.n), r),
        h_r=h_r(s, p, e8, D), h1=h1(s, p), b0=b0(s, p, e8, r), var0=var0(s, p, e8, r),
        h_s=h_s(s, p, e8, delta / 2, r), sigma_t=sigma_t(s, p.L_norm, t), beta_t=beta_t(s, p.L_norm, t),
        gamma_t=gamma_t(s, p.L_norm, t, Mn), sigma_tilde=sigma_tilde(s, p.L_norm, l, r),
        beta_tilde=beta_tilde(s, p.L_norm, l, r), gamma_tilde=gamma_tilde(s, p.L_norm, l, r),
        h_s_hf=h_s_hf(s, p, eps / 2, delta / 2, l, r), h_s_total=h_s_total(s, p, eps, delta, l, r),
        M_RL=M_RL(s, g), M_grad=M_grad(s, g, p.C_star), M_L=M_L(s, g, p.C_star),
        M_ABL=M_ABL(s, g, p.C_star), bernstein_tail=bernstein_tail(eps, N, r, 1.0, p.m, p.n), N=N,
    )


def bounds_for(model, init: InitDist, L, sol: AreSolution, **kw) -> BoundsReport:
    s = summarize(model, init)
    return compute_bounds(s, policy_stats(model, init, L, sol), **kw)


def random_opnorm_directions(m: int, n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """k Gaussian m x n directions scaled to unit spectral norm."""
    D = rng.standard_normal((k, m, n))
    return D / np.linalg.norm(D, 2, axis=(1, 2))[:, None, None]


def verify_admissibility_radius(model, init: InitDist, L, n_samples: int, seed: int = 0,
                                radius: float | None = None, sol: AreSolution | None = None,
                                margin: float = 0.0) -> float:
    """Fraction of perturbations L + D, ||D|| = radius, that are admissible.

    The radius defaults to h_delta(L); samples sit on the boundary of the
    operator-norm ball, the hardest part of the ball.
    """
    L = np.asarray(L, dtype=float)
    if radius is None:
        if sol is None:
            raise ValueError("need an AreSolution (or an explicit radius) to evaluate h_delta")
        radius = h_delta(summarize(model, init), policy_stats(model, init, L, sol))
    if radius == 0:
        return 1.0
    D = random_opnorm_directions(*L.shape, n_samples, stream(seed, "admissibility-radius", 0))
    ok = sum(is_admissible(build_F(model, L + radius * d), margin) for d in D)
    return ok / n_samples


def centered_exp_moment(p: float) -> float:
    """||xi||_{L^p} for xi = Exp(1) - 1, by quadrature."""
    from scipy.integrate import quad
    left, _ = quad(lambda x: (1 - x) ** p * math.exp(-x), 0, 1)
    right, _ = quad(lambda x: (x - 1) ** p * math.exp(-x), 1, np.inf)
    return (left + right) ** (1.0 / p)


def verify_bernstein(gamma: float, r: float, N_grid, eps_grid, trials: int, m: int = 2, n: int = 2,
                     seed: int = 0) -> list[dict]:
    """Empirical tails of ||(1/N) sum xi_i U_i|| against the Bernstein bound.

    xi_i = gamma * (Exp(1) - 1), whose L^p norms are at most gamma * p, and
    U_i uniform on the Frobenius sphere of radius r.
    """
    rows = []
    for a, N in enumerate(N_grid):
        g = stream(seed, "bernstein", a)
        norms = np.empty(trials)
        for k in range(trials):
            xi = gamma * (g.standard_exponential(N) - 1.0)
            Z = g.standard_normal((N, m, n))
            U = Z * (r / np.linalg.norm(Z.reshape(N, -1), axis=1))[:, None, None]
            norms[k] = np.linalg.norm(np.tensordot(xi, U, 1) / N, 2)
        for eps in eps_grid:
            emp = float(np.mean(norms >= eps))
            bound = bernstein_tail(eps, N, r, gamma, m, n)
            rows.append({"N": int(N), "eps": float(eps), "empirical": emp, "bound": bound, "ok": emp <= bound})
    return rows
