"""Built-in problems: the 3x2 polynomial-noise benchmark and a seeded generator."""
from __future__ import annotations

import os

import numpy as np

from .errors import ConfigError, StochLQError
from .operators import build_F, is_admissible
from .params import InitDist, PolyNoise, Problem, Term, load_problem
from .riccati import solve_are
from .rng import stream

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
LOWDIM_PATH = os.path.join(DATA_DIR, "lowdim.json")

NOISE_NAMES = ("xi1", "xi2", "omega1", "omega2", "zeta", "psi")
NOISE_BOUNDS = (0.01, 0.012, 0.015, 0.011, 0.015, 0.011)
XI1, XI2, OM1, OM2, ZETA, PSI = range(6)

# (slot, noise, power) layout shared by the benchmark and the generator
STRUCTURE = (
    ("A", XI1, 1), ("A", XI1, 2), ("A", XI2, 1), ("A", XI2, 3),
    ("B", OM1, 1), ("B", OM1, 2), ("B", OM1, 3), ("B", OM2, 2),
    ("Q", ZETA, 2), ("Q", ZETA, 3),
    ("R", PSI, 1), ("R", PSI, 2),
)


def lowdim() -> Problem:
    """n=3, m=2 system with six uniform noises entering polynomially."""
    A0 = np.array([[0.7, 0.3, 0.2], [-0.2, 0.4, 0.5], [-0.4, 0.2, -0.3]])
    B0 = np.array([[0.5, -0.3], [0.8, 0.3], [0.1, 0.9]])
    coefs = [
        [[1, 0, 0], [0, 0, 0], [0, 0, 1]],
        [[0, 1, 0], [0, 0, 0], [0, 1, 0]],
        [[1, 0, 0], [0, 0, 1], [0, 0, 0]],
        [[0, 0, 1], [0, 1, 0], [1, 0, 0]],
        [[1, 0], [0, 1], [1, 0]],
        [[1, 0], [1, 0], [1, 0]],
        [[0, 0], [0, 1], [1, 1]],
        [[0, 1], [1, 1], [0, 0]],
        [[1, 0, 0], [1, 1, 0], [0, 0, 1]],
        [[0, 0, 0], [0, 1, 1], [0, 1, 0]],
        [[0, 1], [1, 1]],
        [[0, 1], [1, 0]],
    ]
    terms = [Term(s, j, k, np.array(c, dtype=float)) for (s, j, k), c in zip(STRUCTURE, coefs)]
    model = PolyNoise(A0, B0, np.eye(3), np.eye(2), terms, NOISE_BOUNDS, NOISE_NAMES)
    init = InitDist.gaussian(np.zeros(3), np.eye(3))
    return Problem(model, init, np.zeros((2, 3)), "lowdim")


def load_builtin(name: str) -> Problem:
    if name == "lowdim":
        return load_problem(LOWDIM_PATH)
    raise ConfigError("problem", f"unknown built-in problem {name!r} (available: lowdim)")


def resolve_problem(ref: str) -> Problem:
    """A path to a problem file, or ``builtin:<name>``."""
    if ref.startswith("builtin:"):
        return load_builtin(ref.split(":", 1)[1])
    return load_problem(ref)


def _candidate(n: int, m: int, rng: np.random.Generator) -> Problem:
    A0 = rng.uniform(-1, 1, (n, n)) / np.sqrt(n)
    B0 = rng.uniform(-1, 1, (n, m)) / np.sqrt(n)
    shapes = {"A": (n, n), "B": (n, m), "Q": (n, n), "R": (m, m)}
    terms = []
    for slot, j, k in STRUCTURE:
        C = (rng.random(shapes[slot]) < 0.3).astype(float)
        if slot in ("Q", "R"):
            C = np.triu(C)
            C = C + np.triu(C, 1).T
        if not C.any():
            C.flat[rng.integers(C.size)] = 1.0
        terms.append(Term(slot, j, k, C))
    model = PolyNoise(A0, B0, np.eye(n), np.eye(m), terms, NOISE_BOUNDS, NOISE_NAMES)
    return Problem(model, InitDist.gaussian(np.zeros(n), np.eye(n)), np.zeros((m, n)), f"highdim-{n}x{m}")


def gen_highdim(n: int, m: int, seed: int, max_tries: int = 100) -> Problem:
    """Random problem with the benchmark's noise layout.

    Candidates are accepted when the zero policy is admissible and the
    Riccati equation solves, so that training can start from L = 0.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    for attempt in range(max_tries):
        prob = _candidate(n, m, stream(seed, "gen-highdim", attempt))
        if not is_admissible(build_F(prob.model, prob.start())):
            continue
        try:
            solve_are(prob.model, prob.init)
        except StochLQError:
            continue
        prob.name = f"highdim-{n}x{m}-seed{seed}"
        return prob
    raise StochLQError(f"no admissible {n}x{m} problem found in {max_tries} reseeds (seed {seed})")
