"""Stochastic Riccati fixed point K = Pi(E[N + Lambda^T K Lambda])."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, NonPD, NotAdmissible
from .operators import MARGIN, ValueCert, build_F, certify, expect_quadratic, is_admissible, pi_map, _pinv
from .params import InitDist, _sym


@dataclass(frozen=True)
class AreSolution:
    K: np.ndarray
    L_star: np.ndarray
    cost_star: float
    iterations: int
    residual: float
    cert: ValueCert
    history: tuple[float, ...] = ()

    @property
    def sigma_star_norm(self) -> float:
        return float(np.linalg.norm(self.cert.Sigma, 2))

    def to_dict(self) -> dict:
        return {"K": self.K.tolist(), "L_star": self.L_star.tolist(), "cost_star": self.cost_star,
                "residual": self.residual, "iterations": self.iterations}


def are_block(model, K: np.ndarray) -> np.ndarray:
    """The d x d matrix E[N + Lambda^T K Lambda]."""
    S = model.scenarios
    AKA, AKB, BKA, BKB = expect_quadratic(S, K)
    top = np.hstack([S.moments.EQ + AKA, AKB])
    bot = np.hstack([BKA, S.moments.ER + BKB])
    return _sym(np.vstack([top, bot]))


def optimal_gain(K: np.ndarray, model) -> np.ndarray:
    """L = (R_bar + E[B^T K B])^+ E[B^T K A], so that u = -L x."""
    S = model.scenarios
    _, _, BKA, BKB = expect_quadratic(S, K)
    return _pinv(_sym(S.moments.ER + BKB)) @ BKA


def solve_are(model, init: InitDist, tol: float = 1e-12, max_iter: int = 100_000,
              margin: float = MARGIN) -> AreSolution:
    S = model.scenarios
    n = S.dims.n
    K = _sym(S.moments.EQ.copy())
    steps = []
    for it in range(1, max_iter + 1):
        try:
            K_new = pi_map(are_block(S, K), n)
        except np.linalg.LinAlgError:
            K_new = np.full_like(K, np.nan)
        step = float(np.linalg.norm(K_new - K))
        if not np.isfinite(step) or not np.all(np.isfinite(K_new)):
            raise NoConvergence(f"Riccati iteration diverged at iteration {it}")
        steps.append(step)
        done = step <= tol * max(1.0, float(np.linalg.norm(K)))
        K = K_new
        if done:
            break
    else:
        raise NoConvergence(f"Riccati iteration did not converge in {max_iter} iterations "
                            f"(last step {steps[-1]:.3e}); the model may not be stabilizable")
    lam = np.linalg.eigvalsh(K).min()
    if lam <= 0:
        raise NonPD(f"converged K is not positive definite (min eigenvalue {lam:.3e})")
    residual = float(np.linalg.norm(K - pi_map(are_block(S, K), n)))
    L = optimal_gain(K, S)
    F = build_F(S, L)
    if not is_admissible(F, margin):
        raise NotAdmissible(F.rho, margin, "Riccati gain")
    cert = certify(S, init, L, margin)
    return AreSolution(K, L, cert.cost, it, residual, cert, tuple(steps))
