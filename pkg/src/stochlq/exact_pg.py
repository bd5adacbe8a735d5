"""Model-based policy gradient: exact cost and gradient, descent loop, diagnostics."""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ArmijoExhausted, ConfigError, NotAdmissible, StepRejected
from .operators import MARGIN, build_F, certify, is_admissible
from .params import InitDist
from .riccati import AreSolution

TRACE_COLUMNS = ("iter", "cost", "rel_error", "grad_norm", "step", "wall_seconds")


@dataclass(frozen=True)
class StepRule:
    kind: str
    eta: float = 1e-2
    a: float = 1.0
    b: float = 500.0
    c: float = 5.0
    c1: float = 0.01
    beta: float = 0.5
    max_backtracks: int = 30

    def __post_init__(self):
        if self.kind not in ("constant", "diminishing", "armijo"):
            raise ValueError(f"unknown step rule {self.kind!r}")
        if self.kind in ("constant", "armijo") and not self.eta > 0:
            raise ValueError("step size must be positive")
        if self.kind == "diminishing" and not (self.a > 0 and self.b > 0 and self.c >= 0):
            raise ValueError("diminishing rule needs a > 0, b > 0, c >= 0")
        if self.kind == "armijo" and not (0 < self.c1 < 1 and 0 < self.beta < 1 and self.max_backtracks >= 0):
            raise ValueError("Armijo rule needs 0 < c1 < 1, 0 < beta < 1, max_backtracks >= 0")

    @classmethod
    def constant(cls, eta: float) -> "StepRule":
        return cls("constant", eta=eta)

    @classmethod
    def diminishing(cls, a: float = 1.0, b: float = 500.0, c: float = 5.0) -> "StepRule":
        return cls("diminishing", a=a, b=b, c=c)

    @classmethod
    def armijo(cls, eta: float = 1e-2, c1: float = 0.01, beta: float = 0.5, max_backtracks: int = 30) -> "StepRule":
        return cls("armijo", eta=eta, c1=c1, beta=beta, max_backtracks=max_backtracks)

    @classmethod
    def parse(cls, text: str) -> "StepRule":
        """``constant:1e-3``, ``diminishing:1,500,5`` or ``armijo[:eta[,c1[,beta[,max_backtracks]]]]``."""
        kind, _, args = text.partition(":")
        try:
            vals = [float(v) for v in args.split(",")] if args else []
            if kind == "constant" and len(vals) == 1:
                return cls.constant(vals[0])
            if kind == "diminishing" and len(vals) <= 3:
                return cls.diminishing(*vals)
            if kind == "armijo" and len(vals) <= 4:
                if len(vals) == 4:
                    vals[3] = int(vals[3])
                return cls.armijo(*vals)
        except ValueError as exc:
            raise ConfigError("step_rule", f"{text!r}: {exc}") from None
        raise ConfigError("step_rule", f"cannot parse {text!r}")

    def spec(self) -> str:
        if self.kind == "constant":
            return f"constant:{self.eta!r}"
        if self.kind == "diminishing":
            return f"diminishing:{self.a!r},{self.b!r},{self.c!r}"
        return f"armijo:{self.eta!r},{self.c1!r},{self.beta!r},{self.max_backtracks}"

    def eta_at(self, k: int) -> float:
        if self.kind == "diminishing":
            return self.a / (self.b + self.c * k)
        return self.eta


@dataclass
class TraceRecord:
    iter: int
    cost: float
    rel_error: float
    grad_norm: float
    step: float
    wall_seconds: float


@dataclass
class DescentTrace:
    records: list[TraceRecord]
    L_final: np.ndarray
    header: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.records:
            w.writerow([r.iter] + [repr(float(getattr(r, c))) for c in TRACE_COLUMNS[1:]])
        return buf.getvalue()


def cost_exact(model, init: InitDist, L, margin: float = MARGIN) -> float:
    return certify(model, init, L, margin).cost


def grad_exact(model, init: InitDist, L, margin: float = MARGIN) -> np.ndarray:
    return certify(model, init, L, margin).grad


def cost_or_inf(model, init: InitDist, L, margin: float = MARGIN, F=None) -> float:
    try:
        return certify(model, init, L, margin, F).cost
    except NotAdmissible:
        return np.inf


def rel_error(cost: float, sol: AreSolution | None) -> float:
    if sol is None:
        return float("nan")
    return abs(cost - sol.cost_star) / sol.cost_star


def armijo_search(f, L: np.ndarray, G: np.ndarray, c0: float, rule: StepRule, slope: float | None = None):
    """First eta = eta_default * beta^j with f(L - eta G) <= c0 - c1 eta slope.

    Returns (eta, L_new, f_new), or None when max_backtracks is exhausted.
    ``slope`` defaults to ||G||_F^2.
    """
    if slope is None:
        slope = float(np.sum(G * G))
    eta = rule.eta
    for _ in range(rule.max_backtracks + 1):
        L_try = L - eta * G
        c_try = f(L_try)
        if c_try <= c0 - rule.c1 * eta * slope:
            return eta, L_try, c_try
        eta *= rule.beta
    return None


def descend_exact(model, init: InitDist, L0, rule: StepRule, iters: int,
                  sol: AreSolution | None = None, margin: float = MARGIN) -> DescentTrace:
    """L_{k+1} = L_k - eta_k grad C(L_k) with exact gradients."""
    L = np.array(L0, dtype=float)
    cert = certify(model, init, L, margin)
    records = []
    t0 = time.perf_counter()
    for k in range(iters + 1):
        g = cert.grad
        gn = float(np.linalg.norm(g))
        rec = TraceRecord(k, cert.cost, rel_error(cert.cost, sol), gn, 0.0, 0.0)
        records.append(rec)
        if k == iters:
            rec.wall_seconds = time.perf_counter() - t0
            break
        if rule.kind == "armijo":
            found = armijo_search(lambda X: cost_or_inf(model, init, X, margin), L, g, cert.cost, rule)
            if found is None:
                raise ArmijoExhausted(k, rule.max_backtracks)
            eta, L_new, _ = found
            F = None
        else:
            eta = rule.eta_at(k)
            L_new = L - eta * g
            F = build_F(model, L_new)
            if not is_admissible(F, margin):
                raise StepRejected(k, f"eta={eta:g} leaves the admissible set (rho={F.rho:.6g})")
        rec.step = eta
        L = L_new
        cert = certify(model, init, L, margin, F)
        rec.wall_seconds = time.perf_counter() - t0
    return DescentTrace(records, L, {"mode": "exact", "rule": rule.spec()})


def contraction_factor(summary, sol: AreSolution, eta: float) -> float:
    """Per-step factor 1 - 2 eta mu^2 sigma_min(R_bar) / ||Sigma_{L*}||."""
    return 1.0 - 2.0 * eta * summary.mu ** 2 * summary.sigma_R / sol.sigma_star_norm


def gap_bounds(model, init: InitDist, L, sol: AreSolution, margin: float = MARGIN) -> tuple[float, float]:
    """Gradient-dominance sandwich (lower, upper) for C(L) - C(L*)."""
    cert = certify(model, init, L, margin)
    mu = float(np.linalg.eigvalsh(init.Sigma0).min())
    sR = float(np.linalg.eigvalsh(model.scenarios.moments.ER).min())
    lower = mu / np.linalg.norm(cert.R_L, 2) * float(np.sum(cert.E_L * cert.E_L))
    upper = sol.sigma_star_norm / (4 * mu ** 2 * sR) * float(np.sum(cert.grad * cert.grad))
    return float(lower), float(upper)


def almost_smoothness_terms(model, init: InitDist, L, L2, margin: float = MARGIN):
    """(C(L') - C(L), 2 tr(S' D^T E_L) + tr(S' D^T R_L D)) with D = L' - L."""
    c = certify(model, init, L, margin)
    c2 = certify(model, init, L2, margin)
    D = c2.L - c.L
    rhs = 2 * np.trace(c2.Sigma @ D.T @ c.E_L) + np.trace(c2.Sigma @ D.T @ c.R_L @ D)
    return c2.cost - c.cost, float(rhs)


def almost_smoothness_residual(model, init: InitDist, L, L2, margin: float = MARGIN) -> float:
    lhs, rhs = almost_smoothness_terms(model, init, L, L2, margin)
    return abs(lhs - rhs)
