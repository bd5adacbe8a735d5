"""Run configuration, multi-seed training, aggregation and the estimator benchmark."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import os
import platform
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bounds import bounds_for, verify_admissibility_radius, verify_bernstein
from .errors import ConfigError
from .exact_pg import DescentTrace, StepRule, descend_exact, grad_exact
from .params import Problem, atomic_write_text
from .problems import resolve_problem
from .riccati import AreSolution, solve_are
from .rng import derive_seed
from .zeroth_order import descend_model_free, estimate_gradient

MODES = ("exact", "model-free", "are", "bounds", "bench")
AGGREGATE_COLUMNS = ("iter", "median_rel_error", "p2_5_rel_error", "p97_5_rel_error", "mean_rel_error",
                     "median_cost", "n_seeds")
BENCH_COLUMNS = ("N", "reps", "mean_rel_error", "std_rel_error", "mean_wall_seconds")


@dataclass
class RunConfig:
    problem: str
    mode: str
    out_dir: str
    step_rule: str = "constant:0.01"
    iters: int = 100
    N: int = 500
    l: int = 30
    r: float = 0.1
    seeds: int = 1
    master_seed: int = 0
    threads: int | None = None
    timing: bool = True
    cost_eval: str = "exact"
    armijo_eval: str = "exact"
    N_grid: list = field(default_factory=lambda: [100, 1000, 10000, 100000, 1000000])
    reps: int = 100
    eps: float = 0.1
    delta: float = 0.05
    t: int = 1
    policy: list | None = None

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ConfigError("mode", f"expected one of {MODES}, got {self.mode!r}")
        if not self.problem.startswith("builtin:") and not os.path.isfile(self.problem):
            raise ConfigError("problem", f"file not found: {self.problem}")
        for name in ("iters", "N", "l", "seeds", "reps", "t"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < (0 if name == "iters" else 1):
                raise ConfigError(name, f"must be a positive integer, got {v!r}")
        for name in ("r", "eps", "delta"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                raise ConfigError(name, f"must be positive, got {v!r}")
        if not 0 < self.delta < 1:
            raise ConfigError("delta", "must lie in (0, 1)")
        if not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ConfigError("master_seed", "must be a non-negative integer")
        if self.threads is not None and (not isinstance(self.threads, int) or self.threads < 1):
            raise ConfigError("threads", "must be a positive integer")
        if self.cost_eval not in ("exact", "mc"):
            raise ConfigError("cost_eval", "expected 'exact' or 'mc'")
        if self.armijo_eval not in ("exact", "mc"):
            raise ConfigError("armijo_eval", "expected 'exact' or 'mc'")
        if not self.N_grid or any(not isinstance(v, int) or v < 1 for v in self.N_grid):
            raise ConfigError("N_grid", "must be a non-empty list of positive integers")
        try:
            StepRule.parse(self.step_rule)
        except ValueError as exc:
            raise ConfigError("step_rule", str(exc)) from None
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("$", "config must be a JSON object")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown field")
        for req in ("problem", "mode", "out_dir"):
            if req not in doc:
                raise ConfigError(req, "missing")
        return cls(**doc)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"invalid JSON: {exc}") from None


@dataclass
class RunArtifact:
    out_dir: str
    files: dict
    summary: dict


def aggregate(traces: list[DescentTrace]) -> list[dict]:
    err = np.array([t.column("rel_error") for t in traces])
    cost = np.array([t.column("cost") for t in traces])
    rows = []
    for k in range(err.shape[1]):
        e = err[:, k]
        rows.append({"iter": k, "median_rel_error": float(np.median(e)),
                     "p2_5_rel_error": float(np.percentile(e, 2.5)),
                     "p97_5_rel_error": float(np.percentile(e, 97.5)),
                     "mean_rel_error": float(np.mean(e)), "median_cost": float(np.median(cost[:, k])),
                     "n_seeds": len(traces)})
    return rows


def rows_to_csv(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in columns])
    return buf.getvalue()


def read_trace_csv(path: str) -> DescentTrace:
    from .exact_pg import TraceRecord
    with open(path) as fh:
        recs = [TraceRecord(int(r["iter"]), float(r["cost"]), float(r["rel_error"]), float(r["grad_norm"]),
                            float(r["step"]), float(r["wall_seconds"])) for r in csv.DictReader(fh)]
    return DescentTrace(recs, np.zeros(0))


def aggregate_from_files(paths: list[str]) -> list[dict]:
    return aggregate([read_trace_csv(p) for p in paths])


def replicate_seed(master_seed: int, s: int) -> int:
    return derive_seed(master_seed, "replicate", s)


def train_seeds(problem: Problem, rule: StepRule, iters: int, N: int, l: int, r: float, seeds: int,
                master_seed: int, sol: AreSolution, threads: int | None = None, cost_eval: str = "exact",
                armijo_eval: str = "exact") -> list[DescentTrace]:
    return [descend_model_free(problem.model, problem.init, problem.start(), rule, iters, N, l, r,
                               replicate_seed(master_seed, s), sol, threads, armijo_eval, cost_eval)
            for s in range(seeds)]


def bench_estimator(problem: Problem, L, N_grid, reps: int, l: int, r: float, master_seed: int,
                    threads: int | None = None) -> list[dict]:
    """Mean relative gradient error and wall time per estimate for each N."""
    g = grad_exact(problem.model, problem.init, L)
    gn = float(np.linalg.norm(g))
    rows = []
    for N in N_grid:
        errs, walls = [], []
        for k in range(reps):
            t0 = time.perf_counter()
            G = estimate_gradient(problem.model, problem.init, L, int(N), l, r,
                                  derive_seed(master_seed, "bench", int(N), k), threads=threads).G
            walls.append(time.perf_counter() - t0)
            errs.append(float(np.linalg.norm(G - g)) / gn)
        rows.append({"N": int(N), "reps": reps, "mean_rel_error": float(np.mean(errs)),
                     "std_rel_error": float(np.std(errs, ddof=1)) if reps > 1 else 0.0,
                     "mean_wall_seconds": float(np.mean(walls))})
    return rows


def _strip_timing(trace: DescentTrace):
    for rec in trace.records:
        rec.wall_seconds = 0.0


def run(config: RunConfig) -> RunArtifact:
    """Execute one configured run and write its artifacts atomically."""
    config.validate()
    problem = resolve_problem(config.problem)
    out = config.out_dir
    os.makedirs(out, exist_ok=True)
    files = {}

    def put(name, text):
        path = os.path.join(out, name)
        atomic_write_text(path, text)
        files[name] = path

    put("config.json", config.dumps())
    L = problem.start() if config.policy is None else np.array(config.policy, dtype=float)
    summary: dict = {"mode": config.mode, "problem": problem.name}
    sol = solve_are(problem.model, problem.init)
    rule = StepRule.parse(config.step_rule)
    if config.mode == "are":
        put("are.json", json.dumps(sol.to_dict(), indent=1) + "\n")
        summary.update(cost_star=sol.cost_star, iterations=sol.iterations)
    elif config.mode == "exact":
        tr = descend_exact(problem.model, problem.init, L, rule, config.iters, sol)
        if not config.timing:
            _strip_timing(tr)
        put("trace.csv", tr.to_csv())
        summary.update(final_rel_error=tr.records[-1].rel_error)
    elif config.mode == "model-free":
        traces = []
        for s in range(config.seeds):
            tr = descend_model_free(problem.model, problem.init, L, rule, config.iters, config.N, config.l,
                                    config.r, replicate_seed(config.master_seed, s), sol, config.threads,
                                    config.armijo_eval, config.cost_eval)
            if not config.timing:
                _strip_timing(tr)
            put(f"trace_seed{s:03d}.csv", tr.to_csv())
            traces.append(tr)
        agg = aggregate(traces)
        put("aggregate.csv", rows_to_csv(agg, AGGREGATE_COLUMNS))
        summary.update(final_mean_rel_error=agg[-1]["mean_rel_error"],
                       final_median_rel_error=agg[-1]["median_rel_error"])
    elif config.mode == "bounds":
        rep = bounds_for(problem.model, problem.init, L, sol, t=config.t, l=config.l, eps=config.eps,
                         delta=config.delta, r=config.r, N=config.N)
        put("bounds.json", json.dumps(rep.to_dict(), indent=1) + "\n")
        frac = verify_admissibility_radius(problem.model, problem.init, L, 500, config.master_seed, sol=sol)
        rows = verify_bernstein(1.0, config.r, [100, 1000, 10000], [0.01, 0.03, 0.1], 1000,
                                seed=config.master_seed)
        rows = [dict(check="bernstein", **r) for r in rows]
        rows.append({"check": "admissibility_radius", "N": 500, "eps": rep.h_delta, "empirical": frac,
                     "bound": 1.0, "ok": frac == 1.0})
        put("verification.csv", rows_to_csv(rows, ("check", "N", "eps", "empirical", "bound", "ok")))
        summary.update(h_delta=rep.h_delta, admissible_fraction=frac)
    else:
        rows = bench_estimator(problem, L, config.N_grid, config.reps, config.l, config.r,
                               config.master_seed, config.threads)
        if not config.timing:
            for r in rows:
                r["mean_wall_seconds"] = 0.0
        put("bench.csv", rows_to_csv(rows, BENCH_COLUMNS))
        summary.update(rows=rows)
    meta = {"version": __version__, "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "python": platform.python_version(), "numpy": np.__version__, "summary": summary}
    put("meta.json", json.dumps(meta, indent=1, default=float) + "\n")
    return RunArtifact(out, files, summary)
