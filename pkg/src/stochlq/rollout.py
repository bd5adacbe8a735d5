"""Closed-loop simulation and finite-horizon costs.

Rollout i takes all of its randomness (x0, then l parameter draws) from its
own keyed stream, so results do not depend on how rollouts are grouped.
Rollouts are evaluated in fixed-size chunks, vectorized within a chunk and
optionally spread over threads; per-rollout values are identical for any
worker count and are reduced in index order.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DivergedRollout
from .operators import build_F, certify, is_admissible, stage_weight, _policy
from .params import InitDist, PolyNoise, sample_x0
from .rng import stream

DIVERGENCE = 1e150
CHUNK = 256
LONG_HORIZON = 1000
THREADS_ENV = "STOCHLQ_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, int(threads))


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray
    controls: np.ndarray
    stage_costs: np.ndarray
    total: float


def simulate(model, init: InitDist, L, l: int, rng: np.random.Generator) -> Trajectory:
    if l < 1:
        raise ValueError("horizon l must be >= 1")
    L = _policy(model.scenarios, L)
    x = sample_x0(init, rng)
    A, B, Q, R = model.materialize(model.draw_noise(rng, l))
    xs, us, cs = [], [], []
    for t in range(l):
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE:
            raise DivergedRollout(0, t)
        u = -L @ x
        xs.append(x)
        us.append(u)
        cs.append(float(x @ Q[t] @ x + u @ R[t] @ u))
        x = A[t] @ x + B[t] @ u
    cs = np.array(cs)
    return Trajectory(np.array(xs), np.array(us), cs, float(cs.sum()))


def chunk_costs(model, Ls: np.ndarray, x0: np.ndarray, noise: np.ndarray, offset: int = 0) -> np.ndarray:
    """Total l-step costs of a batch: Ls (c,m,n), x0 (c,n), noise (c,l,...)."""
    if isinstance(model, PolyNoise):
        return _chunk_costs_poly(model, Ls, x0, noise, offset)
    A, B, Q, R = model.materialize(noise)
    c, l = noise.shape[:2]
    x = x0.copy()
    total = np.zeros(c)
    for t in range(l):
        _guard(x, t, offset)
        u = -(Ls @ x[:, :, None])[:, :, 0]
        total += (np.einsum("ci,cij,cj->c", x, Q[:, t], x, optimize=False)
                  + np.einsum("ci,cij,cj->c", u, R[:, t], u, optimize=False))
        x = (A[:, t] @ x[:, :, None])[:, :, 0] + (B[:, t] @ u[:, :, None])[:, :, 0]
    return total


def _guard(x: np.ndarray, t: int, offset: int):
    big = ~(np.einsum("ci,ci->c", x, x) <= DIVERGENCE ** 2)
    if big.any():
        raise DivergedRollout(offset + int(np.argmax(big)), t)


def _apply(model: PolyNoise, slot: str, phi, v: np.ndarray) -> np.ndarray:
    """Rows of M_i v_i where M_i = M0 + sum_k phi[i, k] C_k."""
    out = v @ model.base[slot].T
    if phi is not None:
        C = model.coef_stack(slot)
        T, p, q = C.shape
        Y = (v @ C.reshape(T * p, q).T).reshape(v.shape[0], T, p)
        out += np.einsum("ck,ckp->cp", phi, Y, optimize=False)
    return out


def _chunk_costs_poly(model: PolyNoise, Ls, x0, noise, offset):
    # never forms the per-draw matrices: A x = A0 x + sum_k xi^k (C_k x)
    feats = model.features(noise)
    c, l = noise.shape[:2]
    x = x0.copy()
    total = np.zeros(c)
    for t in range(l):
        _guard(x, t, offset)
        ph = {s: (None if f is None else f[:, t]) for s, f in feats.items()}
        u = -(Ls @ x[:, :, None])[:, :, 0]
        total += (np.einsum("ci,ci->c", x, _apply(model, "Q", ph["Q"], x))
                  + np.einsum("ci,ci->c", u, _apply(model, "R", ph["R"], u)))
        x = _apply(model, "A", ph["A"], x) + _apply(model, "B", ph["B"], u)
    return total


def run_rollouts(model, L, l: int, N: int, draw: Callable, threads: int | None = None):
    """Evaluate N rollouts; ``draw(i)`` returns (U_i or None, x0_i, noise_i).

    Returns (costs (N,), U (N,m,n) or None).
    """
    if N < 1 or l < 1:
        raise ValueError("need N >= 1 and l >= 1")
    L = _policy(model.scenarios, L)
    starts = list(range(0, N, CHUNK))

    def work(c0):
        c1 = min(c0 + CHUNK, N)
        items = [draw(i) for i in range(c0, c1)]
        x0 = np.stack([it[1] for it in items])
        noise = np.stack([it[2] for it in items])
        if items[0][0] is None:
            U = None
            Ls = np.broadcast_to(L, (c1 - c0,) + L.shape)
        else:
            U = np.stack([it[0] for it in items])
            Ls = L + U
        return chunk_costs(model, Ls, x0, noise, c0), U

    nt = resolve_threads(threads)
    if nt == 1 or len(starts) == 1:
        parts = [work(c0) for c0 in starts]
    else:
        with ThreadPoolExecutor(max_workers=nt) as ex:
            parts = list(ex.map(work, starts))
    costs = np.concatenate([p[0] for p in parts])
    U = None if parts[0][1] is None else np.concatenate([p[1] for p in parts])
    return costs, U


@dataclass(frozen=True)
class McCost:
    mean: float
    stderr: float
    N: int
    l: int
    seed: int
    samples: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "N": self.N, "l": self.l, "seed": self.seed}


def mc_cost(model, init: InitDist, L, l: int, N: int, seed: int, threads: int | None = None,
            tag: str = "rollout", index: tuple[int, ...] = (), keep_samples: bool = False) -> McCost:
    """Monte Carlo estimate of the l-step cost from N independent rollouts."""
    def draw(i):
        g = stream(seed, tag, *index, i)
        return None, sample_x0(init, g), model.draw_noise(g, l)

    costs, _ = run_rollouts(model, L, l, N, draw, threads)
    sd = float(costs.std(ddof=1)) if N > 1 else float("nan")
    return McCost(float(costs.mean()), sd / np.sqrt(N), N, l, seed, costs if keep_samples else None)


def _finite_pieces(model, init: InitDist, L, l: int):
    F = build_F(model, L)
    W = stage_weight(model, L).reshape(-1)
    sig = np.asarray(init.Sigma0, dtype=float).reshape(-1)
    n = F.n
    if l > LONG_HORIZON and is_admissible(F):
        # sum_{t<l} F^t = (I - F)^{-1} (I - F^l)
        sig_l = np.linalg.matrix_power(F.M, l) @ sig
        acc = np.linalg.solve(np.eye(n * n) - F.M, sig - sig_l)
        return acc.reshape(n, n), sig_l.reshape(n, n), W.reshape(n, n)
    acc = np.zeros_like(sig)
    for _ in range(l):
        acc += sig
        sig = F.M @ sig
    return acc.reshape(n, n), sig.reshape(n, n), W.reshape(n, n)


def sigma_finite_exact(model, init: InitDist, L, l: int) -> np.ndarray:
    """Sigma^(l) = sum_{t<l} F^t(Sigma0)."""
    acc, _, _ = _finite_pieces(model, init, L, l)
    return 0.5 * (acc + acc.T)


def cost_finite_exact(model, init: InitDist, L, l: int) -> float:
    """C^(l)(L) = sum_{t<l} <F^t(Sigma0), Q_bar + L^T R_bar L>."""
    if l < 1:
        raise ValueError("horizon l must be >= 1")
    acc, _, W = _finite_pieces(model, init, L, l)
    return float(np.sum(acc * W))


def cost_tail_exact(model, init: InitDist, L, l: int) -> float:
    """C(L) - C^(l)(L) = <F^l(Sigma0), P_L>, without cancellation."""
    F = build_F(model, L)
    sig_l = np.linalg.matrix_power(F.M, l) @ np.asarray(init.Sigma0, dtype=float).reshape(-1)
    return float(np.sum(sig_l.reshape(F.n, F.n) * certify(model, init, L, F=F).P))
