import json
import os

import numpy as np
import pytest

from stochlq.errors import ConfigError
from stochlq.exact_pg import DescentTrace, TraceRecord
from stochlq.experiments import (AGGREGATE_COLUMNS, RunConfig, aggregate, aggregate_from_files, read_trace_csv,
                                 replicate_seed, run)
from stochlq.operators import build_F, is_admissible
from stochlq.problems import gen_highdim, resolve_problem
from stochlq.riccati import solve_are


def fake_trace(errs):
    recs = [TraceRecord(k, 1.0 + e, e, 0.0, 0.0, 0.0) for k, e in enumerate(errs)]
    return DescentTrace(recs, np.zeros((1, 1)))


def test_aggregate_statistics():
    traces = [fake_trace([0.5, e]) for e in (0.1, 0.2, 0.3, 0.4)]
    rows = aggregate(traces)
    assert list(rows[0]) == list(AGGREGATE_COLUMNS)
    assert rows[1]["median_rel_error"] == pytest.approx(0.25)
    assert rows[1]["mean_rel_error"] == pytest.approx(0.25)
    assert rows[1]["p2_5_rel_error"] == pytest.approx(np.percentile([0.1, 0.2, 0.3, 0.4], 2.5))
    assert rows[0]["n_seeds"] == 4


def test_config_roundtrip_and_validation(tmp_path):
    cfg = RunConfig(problem="builtin:lowdim", mode="model-free", out_dir=str(tmp_path), seeds=3)
    assert RunConfig.loads(cfg.dumps()) == cfg
    with pytest.raises(ConfigError, match="unknown"):
        RunConfig.from_dict({**cfg.to_dict(), "colour": 1})
    for field, value in (("mode", "fast"), ("N", 0), ("r", -1.0), ("delta", 2.0), ("step_rule", "foo"),
                         ("threads", 0), ("problem", str(tmp_path / "none.json"))):
        bad = RunConfig.from_dict({**cfg.to_dict(), field: value})
        with pytest.raises(ConfigError) as exc:
            bad.validate()
        assert field in str(exc.value)


def test_exact_run_artifacts_and_snapshot_reproduce(tmp_path):
    cfg = RunConfig(problem="builtin:lowdim", mode="exact", out_dir=str(tmp_path / "a"), iters=4, timing=False)
    art = run(cfg)
    assert set(art.files) == {"config.json", "trace.csv", "meta.json"}
    again = RunConfig.loads((tmp_path / "a" / "config.json").read_text())
    again.out_dir = str(tmp_path / "b")
    run(again)
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()
    tr = read_trace_csv(str(tmp_path / "a" / "trace.csv"))
    assert len(tr.records) == 5 and tr.records[0].iter == 0


def test_model_free_run_aggregate_matches_files(tmp_path):
    cfg = RunConfig(problem="builtin:lowdim", mode="model-free", out_dir=str(tmp_path), iters=2, N=64, l=5,
                    seeds=3, timing=False, step_rule="constant:0.001")
    run(cfg)
    paths = [os.path.join(tmp_path, f"trace_seed{s:03d}.csv") for s in range(3)]
    rows = aggregate_from_files(paths)
    text = (tmp_path / "aggregate.csv").read_text().strip().split("\n")
    assert text[0] == ",".join(AGGREGATE_COLUMNS)
    assert float(text[-1].split(",")[1]) == rows[-1]["median_rel_error"]
    assert len({replicate_seed(0, s) for s in range(100)}) == 100


def test_are_mode(tmp_path):
    run(RunConfig(problem="builtin:lowdim", mode="are", out_dir=str(tmp_path)))
    doc = json.loads((tmp_path / "are.json").read_text())
    assert doc["cost_star"] == pytest.approx(4.063281150229444, rel=1e-12)


def test_gen_highdim_deterministic_and_valid(tmp_path):
    a, b = gen_highdim(3, 2, 5), gen_highdim(3, 2, 5)
    np.testing.assert_array_equal(a.model.base["A"], b.model.base["A"])
    assert is_admissible(build_F(a.model, a.start()))
    solve_are(a.model, a.init)
    s = gen_highdim(1, 1, 0)
    assert s.model.scenarios.dims.n == 1
    assert not np.array_equal(gen_highdim(3, 2, 6).model.base["A"], a.model.base["A"])
    with pytest.raises(ValueError):
        gen_highdim(0, 1, 0)


def test_resolve_problem(tmp_path):
    assert resolve_problem("builtin:lowdim").name
    with pytest.raises(ConfigError):
        resolve_problem("builtin:unknown")
