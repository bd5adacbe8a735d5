"""Closed-loop covariance operator F_L, Lyapunov solves and the Pi/Gamma maps.

Vectorization is row-major: vec(X) = X.reshape(-1), so that
(M kron N) vec(X) = vec(M X N^T).  F_L is stored as the n^2 x n^2 matrix
E[(A-BL) kron (A-BL)], assembled from the cached Kronecker moments of the
scenario set; its transpose represents the adjoint F_L^*.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NotAdmissible
from .params import InitDist, ScenarioSet, TOL_PSD, _sym

MARGIN = 1e-9
TOL_PINV = 1e-12


@dataclass(frozen=True)
class FOperator:
    M: np.ndarray
    rho: float
    n: int

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (self.M @ np.asarray(X).reshape(-1)).reshape(self.n, self.n)

    def adjoint(self, Y: np.ndarray) -> np.ndarray:
        return (self.M.T @ np.asarray(Y).reshape(-1)).reshape(self.n, self.n)


def _policy(S: ScenarioSet, L) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    n, m = S.dims.n, S.dims.m
    if L.ndim == 0 and n == m == 1:
        L = L.reshape(1, 1)
    if L.shape != (m, n):
        raise ValueError(f"policy has shape {L.shape}, expected {(m, n)}")
    if not np.all(np.isfinite(L)):
        raise ValueError("policy has non-finite entries")
    return L


def closed_loop_matrix(S: ScenarioSet, L: np.ndarray) -> np.ndarray:
    """E[(A-BL) kron (A-BL)] from the cached moments."""
    mo = S.moments
    n = S.dims.n
    In = np.eye(n)
    return mo.AA - mo.AB @ np.kron(In, L) - mo.BA @ np.kron(L, In) + mo.BB @ np.kron(L, L)


def spectral_radius(M: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def build_F(model, L) -> FOperator:
    S = model.scenarios
    L = _policy(S, L)
    M = closed_loop_matrix(S, L)
    return FOperator(M, spectral_radius(M), S.dims.n)


def is_admissible(F: FOperator, margin: float = MARGIN) -> bool:
    return bool(F.rho <= 1.0 - margin)


def _solve(Mat: np.ndarray, b: np.ndarray) -> np.ndarray:
    lu = sla.lu_factor(Mat, check_finite=False)
    x = sla.lu_solve(lu, b, check_finite=False)
    # one step of iterative refinement
    return x + sla.lu_solve(lu, b - Mat @ x, check_finite=False)


def solve_sigma(F: FOperator, Sigma0: np.ndarray, margin: float = MARGIN) -> np.ndarray:
    """Sigma_L = sum_t F^t(Sigma0), i.e. (I - M) vec(Sigma_L) = vec(Sigma0)."""
    if not is_admissible(F, margin):
        raise NotAdmissible(F.rho, margin)
    x = _solve(np.eye(F.n * F.n) - F.M, np.asarray(Sigma0, dtype=float).reshape(-1))
    return _sym(x.reshape(F.n, F.n))


def stage_weight(model, L) -> np.ndarray:
    """Q_bar + L^T R_bar L."""
    S = model.scenarios
    L = _policy(S, L)
    return _sym(S.moments.EQ + L.T @ S.moments.ER @ L)


def solve_P(model, L, F: FOperator | None = None, margin: float = MARGIN) -> np.ndarray:
    """P_L solving P = Q_bar + L^T R_bar L + E[(A-BL)^T P (A-BL)]."""
    if F is None:
        F = build_F(model, L)
    if not is_admissible(F, margin):
        raise NotAdmissible(F.rho, margin)
    n = F.n
    x = _solve(np.eye(n * n) - F.M.T, stage_weight(model, L).reshape(-1))
    return _sym(x.reshape(n, n))


def expect_quadratic(model, K: np.ndarray):
    """E[A^T K A], E[A^T K B], E[B^T K A], E[B^T K B]."""
    S = model.scenarios
    mo = S.moments
    n, m = S.dims.n, S.dims.m
    k = np.asarray(K, dtype=float).reshape(-1)
    return ((mo.AA.T @ k).reshape(n, n), (mo.AB.T @ k).reshape(n, m),
            (mo.BA.T @ k).reshape(m, n), (mo.BB.T @ k).reshape(m, m))


def _pinv(X: np.ndarray) -> np.ndarray:
    if not np.any(X):
        return np.zeros(X.shape[::-1])
    return np.linalg.pinv(X, rcond=TOL_PINV)


def _blocks(P: np.ndarray, n: int):
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or not 0 < n < P.shape[0]:
        raise ValueError(f"expected a square d x d matrix with d > n={n}, got {P.shape}")
    return P[:n, :n], P[:n, n:], P[n:, :n], P[n:, n:]


def pi_map(P: np.ndarray, n: int) -> np.ndarray:
    """Pi(P) = P_xx - P_xu P_uu^+ P_ux."""
    Pxx, Pxu, Pux, Puu = _blocks(P, n)
    return _sym(Pxx - Pxu @ _pinv(Puu) @ Pux)


def gamma_map(P: np.ndarray, n: int) -> np.ndarray:
    """Gamma(P) = -P_uu^+ P_ux."""
    _, _, Pux, Puu = _blocks(P, n)
    return -_pinv(Puu) @ Pux


@dataclass(frozen=True)
class ValueCert:
    L: np.ndarray
    P: np.ndarray
    Sigma: np.ndarray
    R_L: np.ndarray
    E_L: np.ndarray
    cost: float
    grad: np.ndarray
    rho: float

    def to_dict(self) -> dict:
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()}


def certify(model, init: InitDist, L, margin: float = MARGIN, F: FOperator | None = None) -> ValueCert:
    """Exact value certificate of an admissible policy (``F`` may be passed if already built)."""
    S = model.scenarios
    L = _policy(S, L)
    if init.n != S.dims.n:
        raise ValueError(f"initial state has dimension {init.n}, model has n={S.dims.n}")
    if F is None:
        F = build_F(S, L)
    Sigma = solve_sigma(F, init.Sigma0, margin)
    P = solve_P(S, L, F, margin)
    _, _, BPA, BPB = expect_quadratic(S, P)
    R_L = _sym(S.moments.ER + BPB)
    E_L = R_L @ L - BPA
    cost = float(np.sum(P * init.Sigma0))
    return ValueCert(L, P, Sigma, R_L, E_L, cost, 2.0 * E_L @ Sigma, F.rho)


def lyapunov_residuals(model, init: InitDist, cert: ValueCert) -> tuple[float, float]:
    """Relative residuals of the P and Sigma fixed-point equations."""
    F = build_F(model, cert.L)
    rP = cert.P - stage_weight(model, cert.L) - F.adjoint(cert.P)
    rS = cert.Sigma - init.Sigma0 - F.apply(cert.Sigma)
    return (float(np.linalg.norm(rP, 2) / max(np.linalg.norm(cert.P, 2), TOL_PSD)),
            float(np.linalg.norm(rS, 2) / max(np.linalg.norm(cert.Sigma, 2), TOL_PSD)))


def closed_loop_norm_sq(model, L) -> float:
    """E||A - BL||^2 (spectral norm)."""
    S = model.scenarios
    L = _policy(S, L)
    return float(S.prob @ np.linalg.norm(S.A - S.B @ L, 2, axis=(1, 2)) ** 2)
