"""Sphere-smoothed zeroth-order gradient estimates and model-free descent."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import NotAdmissible, StepRejected
from .exact_pg import DescentTrace, StepRule, TraceRecord, armijo_search, cost_or_inf, rel_error
from .operators import MARGIN, build_F, is_admissible, _policy
from .params import InitDist, sample_x0
from .riccati import AreSolution
from .rng import stream
from .rollout import mc_cost, run_rollouts

ARMIJO_MC_ROLLOUTS = 2000


def sample_sphere(m: int, n: int, r: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from {U in R^{m x n}: ||U||_F = r}."""
    if not r > 0:
        raise ValueError("radius must be positive")
    while True:
        G = rng.standard_normal((m, n))
        nrm = np.linalg.norm(G)
        if nrm > 0:
            return G * (r / nrm)


@dataclass(frozen=True)
class GradEstimate:
    G: np.ndarray
    N: int
    l: int
    r: float
    seed: int
    iteration: int = 0
    costs: np.ndarray | None = None
    U: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {"G": self.G.tolist(), "N": self.N, "l": self.l, "r": self.r, "seed": self.seed,
                "iteration": self.iteration}


def estimate_gradient(model, init: InitDist, L, N: int, l: int, r: float, seed: int, *,
                      iteration: int = 0, keep_samples: bool = False, threads: int | None = None) -> GradEstimate:
    """(1/N) sum_i (mn/r^2) C_i U_i with C_i the l-step cost under L + U_i."""
    if N < 1 or l < 1 or not r > 0:
        raise ValueError("need N >= 1, l >= 1 and r > 0")
    L = _policy(model.scenarios, L)
    m, n = L.shape

    def draw(i):
        g = stream(seed, "zo-estimate", iteration, i)
        U = sample_sphere(m, n, r, g)
        return U, sample_x0(init, g), model.draw_noise(g, l)

    costs, U = run_rollouts(model, L, l, N, draw, threads)
    G = (m * n / r ** 2) * (np.sum(costs[:, None, None] * U, axis=0) / N)
    return GradEstimate(G, N, l, float(r), int(seed), int(iteration),
                        costs if keep_samples else None, U if keep_samples else None)


def finite_costs_batch(model, init: InitDist, Ls: np.ndarray, l: int) -> np.ndarray:
    """Exact C^(l) for a stack of policies (K, m, n)."""
    S = model.scenarios
    mo = S.moments
    n = S.dims.n
    In = np.eye(n)
    K = Ls.shape[0]
    IL = np.einsum("ij,kab->kiajb", In, Ls).reshape(K, n * S.dims.m, n * n)
    LI = np.einsum("kab,ij->kaibj", Ls, In).reshape(K, S.dims.m * n, n * n)
    LL = np.einsum("kab,kcd->kacbd", Ls, Ls).reshape(K, S.dims.m ** 2, n * n)
    M = mo.AA - mo.AB @ IL - mo.BA @ LI + mo.BB @ LL
    W = mo.EQ[None] + np.swapaxes(Ls, 1, 2) @ mo.ER @ Ls
    W = W.reshape(K, -1)
    sig = np.broadcast_to(init.Sigma0.reshape(-1), (K, n * n)).copy()
    total = np.zeros(K)
    for _ in range(l):
        total += np.sum(sig * W, axis=1)
        sig = (M @ sig[:, :, None])[:, :, 0]
    return total


def smoothed_gradient(model, init: InitDist, L, l: int, r: float, n_dirs: int, seed: int,
                      batch: int = 4096) -> np.ndarray:
    """Reference for E[estimate]: (mn/r^2) E[C^(l)(L+U) U], antithetic Monte Carlo over the sphere."""
    L = _policy(model.scenarios, L)
    m, n = L.shape
    g = stream(seed, "smoothed-gradient", 0)
    acc = np.zeros((m, n))
    done = 0
    while done < n_dirs:
        k = min(batch, n_dirs - done)
        Z = g.standard_normal((k, m, n))
        U = Z * (r / np.linalg.norm(Z.reshape(k, -1), axis=1))[:, None, None]
        d = finite_costs_batch(model, init, L + U, l) - finite_costs_batch(model, init, L - U, l)
        acc += np.sum(0.5 * d[:, None, None] * U, axis=0)
        done += k
    return (m * n / r ** 2) * acc / n_dirs


def descend_model_free(model, init: InitDist, L0, rule: StepRule, iters: int, N: int, l: int, r: float,
                       master_seed: int, sol: AreSolution | None = None, threads: int | None = None,
                       armijo_eval: str = "exact", cost_eval: str = "exact",
                       margin: float = MARGIN) -> DescentTrace:
    """L_{k+1} = L_k - eta_k G_k with one fresh estimate per iteration.

    Estimate k uses streams keyed by (master_seed, k).  The Armijo test uses
    the exact cost when ``armijo_eval == "exact"`` and a paired-seed Monte
    Carlo cost otherwise; if no trial step is accepted the iterate is kept
    (step 0) and the next estimate decides.
    """
    if armijo_eval not in ("exact", "mc") or cost_eval not in ("exact", "mc"):
        raise ValueError("armijo_eval and cost_eval must be 'exact' or 'mc'")
    L = np.array(L0, dtype=float)
    F = build_F(model, L)
    if not is_admissible(F, margin):
        raise NotAdmissible(F.rho, margin, "initial policy")

    def trace_cost(X, k, F=None):
        if cost_eval == "exact":
            return cost_or_inf(model, init, X, margin, F)
        return mc_cost(model, init, X, l, ARMIJO_MC_ROLLOUTS, master_seed, threads, "trace-cost", (k,)).mean

    records = []
    t0 = time.perf_counter()
    c = trace_cost(L, 0)
    for k in range(iters + 1):
        rec = TraceRecord(k, c, rel_error(c, sol) if cost_eval == "exact" else float("nan"), float("nan"), 0.0, 0.0)
        records.append(rec)
        if k == iters:
            rec.wall_seconds = time.perf_counter() - t0
            break
        G = estimate_gradient(model, init, L, N, l, r, master_seed, iteration=k, threads=threads).G
        rec.grad_norm = float(np.linalg.norm(G))
        if rule.kind == "armijo":
            if armijo_eval == "exact":
                f = lambda X: cost_or_inf(model, init, X, margin)
                c0 = f(L)
            else:
                def f(X):
                    if not is_admissible(build_F(model, X), margin):
                        return np.inf
                    return mc_cost(model, init, X, l, ARMIJO_MC_ROLLOUTS, master_seed, threads, "armijo", (k,)).mean
                c0 = f(L)
            found = armijo_search(f, L, G, c0, rule)
            if found is not None:
                eta, L, _ = found
                rec.step = eta
        else:
            eta = rule.eta_at(k)
            L_new = L - eta * G
            F = build_F(model, L_new)
            if not is_admissible(F, margin):
                raise StepRejected(k, f"eta={eta:g} leaves the admissible set (rho={F.rho:.6g})")
            L = L_new
            rec.step = eta
        c = trace_cost(L, k + 1, F if rule.kind != "armijo" else None)
        rec.wall_seconds = time.perf_counter() - t0
    header = {"mode": "model-free", "rule": rule.spec(), "N": N, "l": l, "r": r, "master_seed": master_seed,
              "armijo_eval": armijo_eval if rule.kind == "armijo" else "n/a", "cost_eval": cost_eval}
    return DescentTrace(records, L, header)
