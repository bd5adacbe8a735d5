"""Joint distribution of (A, B, Q, R), the initial-state law, and problem files.

Two model front ends share one sampling interface:

* ``ScenarioSet``: finitely many weighted atoms.
* ``PolyNoise``: base matrices plus polynomial terms in i.i.d. uniform noises.
  Exact expectations go through ``discretize`` (tensor Gauss-Legendre).

Both expose ``draw_noise(rng, size)`` (raw randomness only) and
``materialize(noise)`` (matrices), so rollouts can draw per-sample noise from
keyed streams and then build matrices for a whole chunk at once.
"""
from __future__ import annotations

import functools
import itertools
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError

TOL_PSD = 1e-10
MAX_NOISE_DIMS = 8
SLOTS = ("A", "B", "Q", "R")


def _sym(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + np.swapaxes(X, -1, -2))


@dataclass(frozen=True)
class Dims:
    n: int
    m: int

    def __post_init__(self):
        if int(self.n) < 1 or int(self.m) < 1:
            raise ValueError(f"dimensions must be positive, got n={self.n}, m={self.m}")

    @property
    def d(self) -> int:
        return self.n + self.m

    def slot_shape(self, slot: str) -> tuple[int, int]:
        n, m = self.n, self.m
        return {"A": (n, n), "B": (n, m), "Q": (n, n), "R": (m, m)}[slot]


@dataclass(frozen=True)
class ParamScenario:
    prob: float
    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray


class Moments(NamedTuple):
    """First moments and Kronecker second moments (row-major vec convention).

    ``AB`` is E[A kron B]; with row-major vec, (X kron Y) vec(Z) = vec(X Z Y^T).
    """
    EA: np.ndarray
    EB: np.ndarray
    EQ: np.ndarray
    ER: np.ndarray
    AA: np.ndarray
    AB: np.ndarray
    BA: np.ndarray
    BB: np.ndarray


def _kron_moment(p, X, Y):
    k, a, b = X.shape
    _, c, d = Y.shape
    outer = (X.reshape(k, a * b) * p[:, None]).T @ Y.reshape(k, c * d)
    return outer.reshape(a, b, c, d).transpose(0, 2, 1, 3).reshape(a * c, b * d)


def _check_psd(name: str, X: np.ndarray):
    lo = np.linalg.eigvalsh(X).min()
    if lo < -TOL_PSD:
        raise ValueError(f"{name} is not positive semi-definite (min eigenvalue {lo:.3e})")


class ScenarioSet:
    """Finite joint distribution: atom i has probability prob[i]."""

    kind = "atoms"

    def __init__(self, prob, A, B, Q, R):
        prob = np.asarray(prob, dtype=float).reshape(-1)
        A, B, Q, R = (np.asarray(X, dtype=float) for X in (A, B, Q, R))
        if A.ndim == 2:
            A, B, Q, R = A[None], B[None], Q[None], R[None]
        k = prob.size
        if k == 0:
            raise ValueError("scenario set is empty")
        n, m = A.shape[1], B.shape[2]
        self.dims = Dims(n, m)
        for slot, X in zip(SLOTS, (A, B, Q, R)):
            if X.shape != (k,) + self.dims.slot_shape(slot):
                raise ValueError(f"{slot} atoms have shape {X.shape}, expected {(k,) + self.dims.slot_shape(slot)}")
            if not np.all(np.isfinite(X)):
                raise ValueError(f"{slot} atoms contain non-finite entries")
        if np.any(prob <= 0):
            raise ValueError("scenario probabilities must be positive")
        if abs(prob.sum() - 1.0) > 1e-12:
            raise ValueError(f"scenario probabilities sum to {prob.sum()!r}, not 1")
        # only the symmetric part of Q and R enters any quadratic form
        Q, R = _sym(Q), _sym(R)
        _check_psd("Q", Q)
        _check_psd("R", R)
        self.prob, self.A, self.B, self.Q, self.R = prob, A, B, Q, R
        for X in (prob, A, B, Q, R):
            X.setflags(write=False)
        self._cdf = np.cumsum(prob)
        self._cdf[-1] = 1.0
        self.moments = Moments(
            np.tensordot(prob, A, 1), np.tensordot(prob, B, 1),
            np.tensordot(prob, Q, 1), np.tensordot(prob, R, 1),
            _kron_moment(prob, A, A), _kron_moment(prob, A, B),
            _kron_moment(prob, B, A), _kron_moment(prob, B, B),
        )

    def __len__(self):
        return self.prob.size

    def __iter__(self):
        for i in range(len(self)):
            yield ParamScenario(float(self.prob[i]), self.A[i], self.B[i], self.Q[i], self.R[i])

    @classmethod
    def from_scenarios(cls, scenarios: Sequence[ParamScenario]) -> "ScenarioSet":
        return cls([s.prob for s in scenarios], [s.A for s in scenarios], [s.B for s in scenarios],
                   [s.Q for s in scenarios], [s.R for s in scenarios])

    @classmethod
    def deterministic(cls, A, B, Q, R) -> "ScenarioSet":
        return cls([1.0], *(np.atleast_2d(np.asarray(X, dtype=float)) for X in (A, B, Q, R)))

    @property
    def scenarios(self) -> "ScenarioSet":
        return self

    def draw_noise(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.random(size)

    def materialize(self, noise: np.ndarray):
        idx = np.searchsorted(self._cdf, noise, side="right")
        idx = np.minimum(idx, len(self) - 1)
        return self.A[idx], self.B[idx], self.Q[idx], self.R[idx]

    def bound_K(self) -> float:
        return float(max(np.linalg.norm(X, 2, axis=(1, 2)).max() for X in (self.A, self.B, self.Q, self.R)))


@dataclass(frozen=True)
class Term:
    """coef * xi[noise]**power added to the matrix in ``slot``."""
    slot: str
    noise: int
    power: int
    coef: np.ndarray


class PolyNoise:
    """M = M0 + sum_terms xi_j^k M_{j,k}, with xi_j ~ U[-a_j, a_j] i.i.d."""

    kind = "polynoise"

    def __init__(self, A0, B0, Q0, R0, terms: Sequence[Term], bounds: Sequence[float],
                 names: Sequence[str] | None = None):
        base = {s: np.asarray(X, dtype=float) for s, X in zip(SLOTS, (A0, B0, Q0, R0))}
        n, m = base["A"].shape[0], base["B"].shape[1]
        self.dims = Dims(n, m)
        for s, X in base.items():
            if X.shape != self.dims.slot_shape(s):
                raise ValueError(f"base {s} has shape {X.shape}, expected {self.dims.slot_shape(s)}")
        base["Q"], base["R"] = _sym(base["Q"]), _sym(base["R"])
        self.bounds = np.asarray(bounds, dtype=float).reshape(-1)
        if np.any(self.bounds < 0):
            raise ValueError("noise bounds must be nonnegative")
        J = self.bounds.size
        self.names = tuple(names) if names is not None else tuple(f"xi{j}" for j in range(J))
        if len(self.names) != J:
            raise ValueError("one name per noise component")
        clean = []
        for t in terms:
            if t.slot not in SLOTS:
                raise ValueError(f"unknown slot {t.slot!r}")
            if not 0 <= int(t.noise) < J:
                raise ValueError(f"term refers to noise {t.noise}, only {J} declared")
            if int(t.power) < 1:
                raise ValueError("term powers must be >= 1")
            C = np.asarray(t.coef, dtype=float)
            if C.shape != self.dims.slot_shape(t.slot):
                raise ValueError(f"{t.slot} coefficient has shape {C.shape}, expected {self.dims.slot_shape(t.slot)}")
            if t.slot in ("Q", "R"):
                C = _sym(C)
            C.setflags(write=False)
            clean.append(Term(t.slot, int(t.noise), int(t.power), C))
        self.base = base
        self.terms = tuple(clean)
        self._coef_stack = {s: np.array([t.coef.reshape(-1) for t in self.terms if t.slot == s])
                            for s in SLOTS}

    def degree(self, slot: str, j: int) -> int:
        return max((t.power for t in self.terms if t.slot == slot and t.noise == j), default=0)

    def active_noises(self) -> list[int]:
        return sorted({t.noise for t in self.terms if self.bounds[t.noise] > 0})

    def min_nodes(self) -> int:
        # products of two parameter entries have degree up to twice the largest power
        deg = max((2 * t.power for t in self.terms), default=0)
        return max(1, math.ceil((deg + 1) / 2))

    def draw_noise(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random((size, self.bounds.size))
        return (2.0 * u - 1.0) * self.bounds

    def materialize(self, noise: np.ndarray):
        noise = np.asarray(noise, dtype=float)
        lead = noise.shape[:-1]
        xi = noise.reshape(-1, self.bounds.size)
        out = []
        for s in SLOTS:
            shape = self.base[s].shape
            X = np.broadcast_to(self.base[s].reshape(-1), (xi.shape[0], shape[0] * shape[1]))
            feats = [(t.noise, t.power) for t in self.terms if t.slot == s]
            if feats:
                phi = np.stack([xi[:, j] ** k for j, k in feats], axis=1)
                X = X + phi @ self._coef_stack[s]
            out.append(X.reshape(lead + shape))
        return tuple(out)

    def features(self, noise: np.ndarray) -> dict:
        """Per slot, the monomials xi_j^k of its terms: shape noise.shape[:-1] + (T,)."""
        noise = np.asarray(noise, dtype=float)
        out = {}
        for s in SLOTS:
            feats = [(t.noise, t.power) for t in self.terms if t.slot == s]
            out[s] = np.stack([noise[..., j] ** k for j, k in feats], axis=-1) if feats else None
        return out

    def coef_stack(self, slot: str) -> np.ndarray:
        shape = self.base[slot].shape
        return self._coef_stack[slot].reshape((-1,) + shape)

    @functools.cached_property
    def scenarios(self) -> ScenarioSet:
        return discretize(self, self.min_nodes())

    def bound_K(self) -> float:
        # max over quadrature atoms and box vertices; conservative surrogate for ess sup
        act = self.active_noises()
        S = self.scenarios
        best = S.bound_K()
        if act and len(act) <= 12:
            vert = np.zeros((2 ** len(act), self.bounds.size))
            for r, signs in enumerate(itertools.product((-1.0, 1.0), repeat=len(act))):
                vert[r, act] = np.asarray(signs) * self.bounds[act]
            mats = self.materialize(vert)
            best = max(best, max(float(np.linalg.norm(X, 2, axis=(1, 2)).max()) for X in mats))
        return best


def discretize(model: PolyNoise, nodes_per_dim: int | None = None) -> ScenarioSet:
    """Compile a PolyNoise model into a tensor Gauss-Legendre scenario set."""
    need = model.min_nodes()
    if nodes_per_dim is None:
        nodes_per_dim = need
    if nodes_per_dim < need:
        raise ValueError(f"nodes_per_dim={nodes_per_dim} below exactness threshold {need}")
    act = model.active_noises()
    if len(act) > MAX_NOISE_DIMS:
        raise ValueError(f"{len(act)} noise dimensions exceed the limit of {MAX_NOISE_DIMS}")
    J = model.bounds.size
    if not act:
        xi = np.zeros((1, J))
        prob = np.ones(1)
    else:
        x, w = np.polynomial.legendre.leggauss(nodes_per_dim)
        grid = np.array(list(itertools.product(range(nodes_per_dim), repeat=len(act))))
        xi = np.zeros((grid.shape[0], J))
        xi[:, act] = x[grid] * model.bounds[act]
        prob = np.prod(w[grid] / 2.0, axis=1)
    A, B, Q, R = model.materialize(xi)
    prob = prob / prob.sum()
    return ScenarioSet(prob, A, B, Q, R)


def as_scenarios(model) -> ScenarioSet:
    return model.scenarios


def sample_params(model, rng: np.random.Generator):
    """One joint draw (A, B, Q, R)."""
    A, B, Q, R = model.materialize(model.draw_noise(rng, 1))
    return A[0], B[0], Q[0], R[0]


def sample_batch(model, rng: np.random.Generator, size: int):
    return model.materialize(model.draw_noise(rng, size))


# ---------------------------------------------------------------- initial state

@dataclass(frozen=True)
class InitDist:
    kind: str
    mean: np.ndarray
    cov: np.ndarray | None = None
    probs: np.ndarray | None = None
    points: np.ndarray | None = None
    sigma0: float = 0.0
    _factor: np.ndarray | None = field(default=None, repr=False, compare=False)

    @classmethod
    def pointmass(cls, x, sigma0: float = 0.0) -> "InitDist":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return cls("pointmass", x, sigma0=float(sigma0))

    @classmethod
    def gaussian(cls, mean, cov, sigma0: float | None = None) -> "InitDist":
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = _sym(np.atleast_2d(np.asarray(cov, dtype=float)))
        if cov.shape != (mean.size, mean.size):
            raise ValueError("covariance shape does not match mean")
        lam, V = np.linalg.eigh(cov)
        if lam.min() < -TOL_PSD:
            raise ValueError("covariance is not positive semi-definite")
        lam = np.clip(lam, 0.0, None)
        if sigma0 is None:
            sigma0 = float(np.sqrt(lam.max()))
        return cls("gaussian", mean, cov=cov, sigma0=float(sigma0), _factor=V * np.sqrt(lam))

    @classmethod
    def atoms(cls, probs, points, sigma0: float | None = None) -> "InitDist":
        probs = np.asarray(probs, dtype=float).reshape(-1)
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[0] != probs.size:
            raise ValueError("one point per probability")
        if np.any(probs <= 0) or abs(probs.sum() - 1) > 1e-12:
            raise ValueError("atom probabilities must be positive and sum to 1")
        mean = probs @ points
        if sigma0 is None:
            sigma0 = float(np.linalg.norm(points - mean, axis=1).max())
        return cls("atoms", mean, probs=probs, points=points, sigma0=float(sigma0))

    @property
    def n(self) -> int:
        return self.mean.size

    @property
    def Sigma0(self) -> np.ndarray:
        """Second moment E[x0 x0^T]."""
        mm = np.outer(self.mean, self.mean)
        if self.kind == "pointmass":
            return mm
        if self.kind == "gaussian":
            return _sym(self.cov + mm)
        return _sym((self.points * self.probs[:, None]).T @ self.points)

    def scaled(self, t: float) -> "InitDist":
        """Law of sqrt(t) x0, whose second moment is t * Sigma0."""
        s = math.sqrt(t)
        if self.kind == "pointmass":
            return InitDist.pointmass(s * self.mean, s * self.sigma0)
        if self.kind == "gaussian":
            return InitDist.gaussian(s * self.mean, t * self.cov, s * self.sigma0)
        return InitDist.atoms(self.probs, s * self.points, s * self.sigma0)

    def is_pd(self) -> bool:
        return bool(np.linalg.eigvalsh(self.Sigma0).min() > TOL_PSD)


def sample_x0(init: InitDist, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    k = 1 if size is None else size
    n = init.n
    if init.kind == "pointmass":
        x = np.broadcast_to(init.mean, (k, n)).copy()
    elif init.kind == "gaussian":
        x = init.mean + rng.standard_normal((k, n)) @ init._factor.T
    else:
        cdf = np.cumsum(init.probs)
        idx = np.minimum(np.searchsorted(cdf, rng.random(k), side="right"), init.probs.size - 1)
        x = init.points[idx].copy()
    return x[0] if size is None else x


# ---------------------------------------------------------------- summary

@dataclass(frozen=True)
class ModelSummary:
    n: int
    m: int
    mu: float
    Qbar: np.ndarray
    Rbar: np.ndarray
    sigma_Q: float
    sigma_R: float
    EA2: float          # E||A||^2
    EB2: float          # E||B||^2
    EAB: float          # E[||A|| ||B||]
    EQ: float           # E||Q||
    ER: float           # E||R||
    Ex02: float         # E||x0||^2 = tr Sigma0
    bound_K: float
    sigma0: float
    x0_mean_norm: float
    flags: tuple[str, ...] = ()


def summarize(model, init: InitDist) -> ModelSummary:
    S = model.scenarios
    if init.n != S.dims.n:
        raise ValueError(f"initial state has dimension {init.n}, model has n={S.dims.n}")
    p = S.prob
    nA = np.linalg.norm(S.A, 2, axis=(1, 2))
    nB = np.linalg.norm(S.B, 2, axis=(1, 2))
    nQ = np.linalg.norm(S.Q, 2, axis=(1, 2))
    nR = np.linalg.norm(S.R, 2, axis=(1, 2))
    Qbar, Rbar = _sym(S.moments.EQ), _sym(S.moments.ER)
    sQ = float(np.linalg.eigvalsh(Qbar).min())
    sR = float(np.linalg.eigvalsh(Rbar).min())
    Sigma0 = init.Sigma0
    mu = float(np.linalg.eigvalsh(Sigma0).min())
    flags = []
    if sQ <= 0:
        flags.append("sigma_min(E[Q]) <= 0")
    if sR <= 0:
        flags.append("sigma_min(E[R]) <= 0")
    if mu <= TOL_PSD:
        flags.append("Sigma0 singular")
    return ModelSummary(
        n=S.dims.n, m=S.dims.m, mu=max(mu, 0.0), Qbar=Qbar, Rbar=Rbar, sigma_Q=sQ, sigma_R=sR,
        EA2=float(p @ nA ** 2), EB2=float(p @ nB ** 2), EAB=float(p @ (nA * nB)),
        EQ=float(p @ nQ), ER=float(p @ nR), Ex02=float(np.trace(Sigma0)),
        bound_K=float(model.bound_K()), sigma0=float(init.sigma0),
        x0_mean_norm=float(np.linalg.norm(init.mean)), flags=tuple(flags),
    )


# ---------------------------------------------------------------- problem files

@dataclass
class Problem:
    model: ScenarioSet | PolyNoise
    init: InitDist
    L0: np.ndarray | None = None
    name: str = ""

    @property
    def dims(self) -> Dims:
        return self.model.dims

    def start(self) -> np.ndarray:
        if self.L0 is not None:
            return np.array(self.L0, dtype=float)
        return np.zeros((self.dims.m, self.dims.n))


def _enc(X) -> list | str:
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        return format(float(X), ".17g")
    return [_enc(row) for row in X]


def _dec(obj, where: str) -> np.ndarray:
    try:
        if isinstance(obj, list):
            return np.array([_dec(o, where) for o in obj], dtype=float)
        return np.asarray(float(obj))
    except (TypeError, ValueError) as exc:
        raise ConfigError(where, f"not a number or nested numeric array ({exc})") from None


def _mat(doc: dict, key: str, where: str, shape=None) -> np.ndarray:
    if key not in doc:
        raise ConfigError(f"{where}.{key}", "missing")
    X = _dec(doc[key], f"{where}.{key}")
    if shape is not None:
        if X.ndim == 0 or X.size != int(np.prod(shape)):
            raise ConfigError(f"{where}.{key}", f"expected shape {shape}, got {X.shape}")
        X = X.reshape(shape)
    return X


def problem_to_dict(problem: Problem) -> dict:
    model, init = problem.model, problem.init
    doc: dict = {"name": problem.name, "dims": {"n": model.dims.n, "m": model.dims.m}}
    if isinstance(model, PolyNoise):
        doc["model"] = {
            "type": "polynoise",
            "base": {s: _enc(model.base[s]) for s in SLOTS},
            "noise": [{"name": nm, "bound": _enc(a)} for nm, a in zip(model.names, model.bounds)],
            "terms": [{"slot": t.slot, "noise": t.noise, "power": t.power, "coef": _enc(t.coef)}
                      for t in model.terms],
        }
    else:
        doc["model"] = {
            "type": "atoms",
            "scenarios": [{"prob": _enc(s.prob), "A": _enc(s.A), "B": _enc(s.B), "Q": _enc(s.Q), "R": _enc(s.R)}
                          for s in model],
        }
    ini: dict = {"kind": init.kind, "sigma0": _enc(init.sigma0)}
    if init.kind == "pointmass":
        ini["mean"] = _enc(init.mean)
    elif init.kind == "gaussian":
        ini["mean"], ini["cov"] = _enc(init.mean), _enc(init.cov)
    else:
        ini["probs"], ini["points"] = _enc(init.probs), _enc(init.points)
    doc["init"] = ini
    if problem.L0 is not None:
        doc["L0"] = _enc(problem.L0)
    return doc


def problem_from_dict(doc: dict) -> Problem:
    if not isinstance(doc, dict):
        raise ConfigError("$", "problem document must be a JSON object")
    try:
        dims = Dims(int(doc["dims"]["n"]), int(doc["dims"]["m"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("dims", f"invalid or missing ({exc})") from None
    n, m = dims.n, dims.m
    md = doc.get("model")
    if not isinstance(md, dict):
        raise ConfigError("model", "missing")
    try:
        if md.get("type") == "polynoise":
            base = md.get("base", {})
            mats = [_mat(base, s, "model.base", dims.slot_shape(s)) for s in SLOTS]
            noise = md.get("noise", [])
            bounds = [float(_dec(z.get("bound"), f"model.noise[{j}].bound")) for j, z in enumerate(noise)]
            names = [str(z.get("name", f"xi{j}")) for j, z in enumerate(noise)]
            terms = []
            for i, t in enumerate(md.get("terms", [])):
                w = f"model.terms[{i}]"
                slot = t.get("slot")
                if slot not in SLOTS:
                    raise ConfigError(f"{w}.slot", f"unknown slot {slot!r}")
                terms.append(Term(slot, int(t.get("noise", -1)), int(t.get("power", 0)),
                                  _mat(t, "coef", w, dims.slot_shape(slot))))
            model = PolyNoise(*mats, terms, bounds, names)
        elif md.get("type") == "atoms":
            sc = md.get("scenarios")
            if not sc:
                raise ConfigError("model.scenarios", "missing or empty")
            prob = [float(_dec(s.get("prob"), f"model.scenarios[{i}].prob")) for i, s in enumerate(sc)]
            stacks = [[_mat(s, slot, f"model.scenarios[{i}]", dims.slot_shape(slot)) for i, s in enumerate(sc)]
                      for slot in SLOTS]
            model = ScenarioSet(prob, *stacks)
        else:
            raise ConfigError("model.type", f"expected 'atoms' or 'polynoise', got {md.get('type')!r}")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("model", str(exc)) from None
    ini = doc.get("init")
    if not isinstance(ini, dict):
        raise ConfigError("init", "missing")
    kind = ini.get("kind")
    s0 = ini.get("sigma0")
    s0 = None if s0 is None else float(_dec(s0, "init.sigma0"))
    try:
        if kind == "pointmass":
            init = InitDist.pointmass(_mat(ini, "mean", "init", (n,)), s0 or 0.0)
        elif kind == "gaussian":
            init = InitDist.gaussian(_mat(ini, "mean", "init", (n,)), _mat(ini, "cov", "init", (n, n)), s0)
        elif kind == "atoms":
            probs = _mat(ini, "probs", "init").reshape(-1)
            init = InitDist.atoms(probs, _mat(ini, "points", "init", (probs.size, n)), s0)
        else:
            raise ConfigError("init.kind", f"expected pointmass, gaussian or atoms, got {kind!r}")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("init", str(exc)) from None
    L0 = _mat(doc, "L0", "$", (m, n)) if "L0" in doc else None
    return Problem(model, init, L0, str(doc.get("name", "")))


def atomic_write_text(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_problem(problem: Problem, path: str):
    atomic_write_text(path, json.dumps(problem_to_dict(problem), indent=1) + "\n")


def load_problem(path: str) -> Problem:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("problem", f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("problem", f"invalid JSON in {path}: {exc}") from None
    return problem_from_dict(doc)
