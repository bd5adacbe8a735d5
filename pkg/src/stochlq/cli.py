"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
Rollout parallelism follows ``--threads`` or the STOCHLQ_THREADS variable.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import ConfigError, StochLQError
from .exact_pg import StepRule, descend_exact, grad_exact
from .experiments import RunConfig, run
from .operators import certify
from .params import atomic_write_text, save_problem
from .problems import gen_highdim, load_builtin, resolve_problem
from .riccati import solve_are
from .rollout import THREADS_ENV, mc_cost
from .zeroth_order import estimate_gradient


def _emit(doc: dict, path: str | None):
    text = json.dumps(doc, indent=1, default=float) + "\n"
    if path:
        atomic_write_text(path, text)
    else:
        sys.stdout.write(text)


def _policy(arg: str | None, problem) -> np.ndarray:
    if arg is None:
        return problem.start()
    if arg == "star":
        return solve_are(problem.model, problem.init).L_star
    text = arg
    if os.path.isfile(arg):
        with open(arg) as fh:
            text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        raise ConfigError("--L", "expected a JSON matrix, a file containing one, or 'star'") from None
    if isinstance(doc, dict):
        doc = doc.get("L", doc.get("L_star"))
    L = np.array(doc, dtype=float)
    shape = (problem.dims.m, problem.dims.n)
    if L.shape != shape:
        raise ConfigError("--L", f"expected shape {shape}, got {L.shape}")
    return L


def _common(p: argparse.ArgumentParser, policy: bool = True):
    p.add_argument("problem", help="problem file, or builtin:lowdim")
    if policy:
        p.add_argument("--L", help="policy as JSON matrix or file ('star' for the Riccati gain; default: problem L0)")
    p.add_argument("-o", "--output", help="write JSON here instead of stdout")


def _rollout_args(p: argparse.ArgumentParser):
    p.add_argument("--N", type=int, default=500)
    p.add_argument("--l", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stochlq", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("solve-are", help="stochastic Riccati fixed point")
    _common(p, policy=False)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-iter", type=int, default=100_000)

    p = sub.add_parser("eval-cost", help="exact or Monte Carlo cost of a policy")
    _common(p)
    p.add_argument("--mc", action="store_true", help="Monte Carlo l-step cost instead of the exact cost")
    _rollout_args(p)

    p = sub.add_parser("grad-exact", help="exact policy gradient")
    _common(p)

    p = sub.add_parser("grad-estimate", help="zeroth-order gradient estimate")
    _common(p)
    _rollout_args(p)
    p.add_argument("--r", type=float, default=0.1)

    p = sub.add_parser("train", help="policy gradient descent (exact or model-free)")
    p.add_argument("problem")
    p.add_argument("--mode", choices=("exact", "model-free"), required=True)
    p.add_argument("--eta", type=float, help="constant step size (shorthand for --step-rule constant:ETA)")
    p.add_argument("--step-rule", default=None, help="constant:ETA | diminishing:A,B,C | armijo[:ETA,C1,BETA,MAXBT]")
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--N", type=int, default=500)
    p.add_argument("--l", type=int, default=30)
    p.add_argument("--r", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--seeds", type=int, default=1, help="number of replications")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--no-timing", action="store_true", help="write zeros in wall_seconds for reproducible files")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("bounds", help="evaluate theory constants and verification checks")
    p.add_argument("problem")
    p.add_argument("--L")
    for name, typ, default in (("eps", float, 0.1), ("delta", float, 0.05), ("t", int, 1), ("l", int, 30),
                               ("r", float, 0.1), ("N", int, 500), ("seed", int, 0)):
        p.add_argument(f"--{name}", type=typ, default=default)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="estimator accuracy and timing over an N grid")
    p.add_argument("problem")
    p.add_argument("--L")
    p.add_argument("--N-grid", type=int, nargs="+", default=[100, 1000, 10000, 100000, 1000000])
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--l", type=int, default=30)
    p.add_argument("--r", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("gen-problem", help="write a problem file")
    p.add_argument("--builtin", choices=("lowdim",), help="export a built-in problem")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("run", help="execute a run config (JSON)")
    p.add_argument("config")
    return ap


def _dispatch(a) -> int:
    if a.cmd == "gen-problem":
        if a.builtin:
            prob = load_builtin(a.builtin)
        elif a.n is not None and a.m is not None:
            if a.n < 1 or a.m < 1:
                raise ConfigError("--n/--m", "must be positive")
            prob = gen_highdim(a.n, a.m, a.seed)
        else:
            raise ConfigError("gen-problem", "give --builtin or both --n and --m")
        save_problem(prob, a.output)
        return 0
    if a.cmd == "run":
        try:
            with open(a.config) as fh:
                cfg = RunConfig.loads(fh.read())
        except FileNotFoundError:
            raise ConfigError("config", f"file not found: {a.config}") from None
        art = run(cfg)
        _emit({"out_dir": art.out_dir, "files": art.files, "summary": art.summary}, None)
        return 0
    if a.cmd == "train":
        rule = a.step_rule or (f"constant:{a.eta!r}" if a.eta is not None else None)
        if rule is None:
            raise ConfigError("--step-rule", "give --eta or --step-rule")
        cfg = RunConfig(problem=a.problem, mode=a.mode, out_dir=a.out, step_rule=rule, iters=a.iters, N=a.N,
                        l=a.l, r=a.r, seeds=a.seeds, master_seed=a.seed, threads=a.threads,
                        timing=not a.no_timing)
        art = run(cfg)
        _emit({"out_dir": art.out_dir, "files": art.files, "summary": art.summary}, None)
        return 0
    if a.cmd in ("bounds", "bench"):
        prob = resolve_problem(a.problem)
        L = _policy(a.L, prob).tolist()
        if a.cmd == "bounds":
            cfg = RunConfig(problem=a.problem, mode="bounds", out_dir=a.out, eps=a.eps, delta=a.delta, t=a.t,
                            l=a.l, r=a.r, N=a.N, master_seed=a.seed, policy=L)
        else:
            cfg = RunConfig(problem=a.problem, mode="bench", out_dir=a.out, N_grid=a.N_grid, reps=a.reps, l=a.l,
                            r=a.r, master_seed=a.seed, threads=a.threads, policy=L)
        art = run(cfg)
        _emit({"out_dir": art.out_dir, "files": art.files, "summary": art.summary}, None)
        return 0

    prob = resolve_problem(a.problem)
    if a.cmd == "solve-are":
        sol = solve_are(prob.model, prob.init, a.tol, a.max_iter)
        _emit(sol.to_dict(), a.output)
        return 0
    L = _policy(a.L, prob)
    if a.cmd == "eval-cost":
        if a.mc:
            doc = mc_cost(prob.model, prob.init, L, a.l, a.N, a.seed, a.threads).to_dict()
        else:
            cert = certify(prob.model, prob.init, L)
            doc = {"cost": cert.cost, "rho": cert.rho}
    elif a.cmd == "grad-exact":
        doc = {"grad": grad_exact(prob.model, prob.init, L).tolist()}
    else:
        doc = estimate_gradient(prob.model, prob.init, L, a.N, a.l, a.r, a.seed, threads=a.threads).to_dict()
    _emit(doc, a.output)
    return 0


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    if getattr(a, "threads", None) is not None and a.threads < 1:
        ap.error("--threads must be positive")
    try:
        return _dispatch(a)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StochLQError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
