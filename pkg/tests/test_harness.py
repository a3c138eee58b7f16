import csv
import io
import json
import math

import numpy as np
import pytest

from aols.exceptions import UnreachableTargetError
from aols.harness import (
    CSV_FIELDS,
    ExperimentConfig,
    SolverSpec,
    TrialRecord,
    _score,
    benchmark_sweep,
    config_hash,
    projection_concentration,
    make_instance,
    minimal_n,
    point_seed,
    run_dir,
    run_paired,
    run_trials,
    sampling_regression,
    success_curve,
    summarize,
    trial_seed,
)
from aols.solvers import brute_force_best_subset


def _strip(recs):
    return [(r.index, r.seed, r.exact, r.partial, r.resid_final, r.failed) for r in recs]


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(10, 5, 5)
    with pytest.raises(ValueError):
        ExperimentConfig(10, 20, 2, trials=0)
    with pytest.raises(ValueError):
        ExperimentConfig(10, 20, 2, distribution="bernoulli")
    with pytest.raises(ValueError):
        ExperimentConfig(10, 20, 2, noise="bounded-l2", eps_nu=-1.0)
    with pytest.raises(ValueError):
        SolverSpec("omp", L=2)
    with pytest.raises(ValueError):
        SolverSpec("cosamp")


def test_labels():
    assert SolverSpec("aols", L=3).label == "aols-L3"
    assert SolverSpec("omp").label == "omp"
    assert SolverSpec("aols", k_max=7).config(3).k_max == 7
    assert SolverSpec("aols").config(3).k_max == 3


def test_trial_seeds():
    assert trial_seed(0, 5) == 5
    assert trial_seed(6, 3) == 5
    assert point_seed(1, "a") != point_seed(1, "b")


def test_easy_overdetermined_regime():
    cfg = ExperimentConfig(8, 4, 2, trials=50)
    recs = run_trials(cfg)
    assert all(r.exact for r in recs)
    for i in range(10):
        A, x, y = make_instance(cfg, trial_seed(cfg.base_seed, i))
        assert set(brute_force_best_subset(A, y, 2).selected) == set(x.support.tolist())


def test_partial_metric():
    class R:
        def support_set(self):
            return {1, 2}
    assert _score({1, 3}, R()) == (False, 0.5)


def test_determinism_and_threads():
    cfg = ExperimentConfig(30, 60, 5, trials=12, base_seed=9, distribution="hybrid", T=3.0)
    a = run_trials(cfg)
    b = run_trials(cfg)
    c = run_trials(cfg, threads=3)
    assert _strip(a) == _strip(b) == _strip(c)
    assert [r.index for r in c] == list(range(12))


def test_paired_instances_bitwise_identical():
    cfg = ExperimentConfig(20, 40, 3, trials=3, noise="bounded-l2", eps_nu=0.1)
    A1, x1, y1 = make_instance(cfg, 7)
    A2, x2, y2 = make_instance(cfg, 7)
    assert np.array_equal(A1.entries, A2.entries) and np.array_equal(y1, y2)
    recs = run_paired(cfg, [SolverSpec("aols"), SolverSpec("ols"), SolverSpec("omp")])
    seeds = {lab: [r.seed for r in rs] for lab, rs in recs.items()}
    assert seeds["aols-L1"] == seeds["ols"] == seeds["omp"]
    # aols and ols are the same algorithm, so paired outcomes coincide
    assert [r.exact for r in recs["aols-L1"]] == [r.exact for r in recs["ols"]]
    with pytest.raises(ValueError):
        run_paired(cfg, [SolverSpec("omp"), SolverSpec("omp")])


def test_summary_err_le_prr():
    cfg = ExperimentConfig(20, 64, 6, trials=40, distribution="hybrid", T=5.0)
    for s in (SolverSpec("omp"), SolverSpec("aols", L=2)):
        p = summarize(run_trials(cfg.replace(solver=s)), "n", 20, s.label)
        assert 0 <= p.err <= p.prr <= 1
        assert p.err_stderr == pytest.approx(math.sqrt(p.err * (1 - p.err) / 40))


def test_summarize_counts_failures():
    recs = [TrialRecord(0, 0, True, 1.0, 0.0, 0.1), TrialRecord(1, 1, False, 0.0, float("nan"), 0.1, True)]
    p = summarize(recs, "k", 3, "omp")
    assert p.err == 0.5 and p.prr == 0.5


def test_success_curve_and_csv(tmp_path):
    cfg = ExperimentConfig(1, 40, 3, trials=20)
    s = success_curve(cfg, [10, 20, 40])
    pts = s.series()
    assert [p.value for p in pts] == [10, 20, 40]
    assert pts[-1].err == 1.0
    for p in pts:
        assert p.bound is not None and 0 <= p.bound <= 1
    text = s.csv_text()
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == CSV_FIELDS
    assert len(rows) == 4
    csv_path, json_path = s.write(tmp_path)
    assert csv_path.read_text() == text
    assert json.loads(json_path.read_text())["points"][0]["value"] == 10
    with pytest.raises(ValueError):
        success_curve(cfg, [20, 10])


def test_success_curve_deterministic():
    cfg = ExperimentConfig(1, 40, 3, trials=10, base_seed=4)
    assert _no_time(success_curve(cfg, [12, 16])) == _no_time(success_curve(cfg, [12, 16]))


def _no_time(s):
    return [(p.value, p.err, p.prr, p.bound) for p in s.points]


def test_minimal_n_and_unreachable():
    cfg = ExperimentConfig(1, 32, 2, trials=20)
    n = minimal_n(cfg, 0.9)
    assert n > 2
    with pytest.raises(UnreachableTargetError):
        minimal_n(cfg.replace(k=8), 1.0, n_max=9)


def test_small_regression():
    cfg = ExperimentConfig(1, 128, 2, trials=20, base_seed=1)
    res = sampling_regression(cfg, [2, 4, 6, 8])
    assert all(p["n_min"] > p["k"] for p in res.points)
    assert res.slope > 0 and 0 <= res.r2 <= 1
    assert len(res.summary.points) == 4
    d = res.as_dict()
    assert set(d) == {"slope", "intercept", "r2", "slope_origin", "r2_origin", "points"}
    with pytest.raises(ValueError):
        sampling_regression(cfg, [3])


def test_benchmark_sweep_shape():
    cfg = ExperimentConfig(40, 80, 2, trials=6)
    s = benchmark_sweep(cfg, [2, 4], [SolverSpec("aols", L=2), SolverSpec("omp")])
    assert [(p.value, p.solver) for p in s.points] == [(2, "aols-L2"), (2, "omp"), (4, "aols-L2"), (4, "omp")]
    for p in s.points:
        assert p.prr == 1.0 and p.mean_time_s >= 0


def test_projection_concentration_small():
    r = projection_concentration(50, 5, samples=4000, seed=1)
    assert abs(r.mean - 0.1) <= 0.05 * 0.1
    assert r.tail_ok
    full = projection_concentration(20, 20, samples=500)
    assert full.mean == pytest.approx(1.0, abs=0.03)
    with pytest.raises(ValueError):
        projection_concentration(10, 11, samples=10)


def test_run_dir(tmp_path):
    c = {"a": 1, "b": [1, 2]}
    assert config_hash(c) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash(c) != config_hash({"a": 2, "b": [1, 2]})
    p = run_dir(tmp_path, c)
    assert p.is_dir() and p.name == "run-" + config_hash(c)
