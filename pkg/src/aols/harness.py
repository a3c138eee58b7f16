"""Monte-Carlo experiment engine: success curves, sampling regression, solver sweeps.

Trial ``i`` of a configuration uses the seed ``base_seed ^ i`` for its
dictionary, signal and noise (each on its own derived stream).  Sweeps derive
a fresh base seed per sweep point, so points never share instances, while all
solvers compared at one point see identical instances.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bounds import best_bound, c0
from .exceptions import RecoveryError, UnreachableTargetError
from .linalg import (
    NoiseSpec,
    derive_seed,
    gaussian_dictionary,
    hybrid_dictionary,
    make_noise,
    make_signal,
    rng_for,
)
from .solvers import SolverConfig, solve

__all__ = [
    "SolverSpec",
    "ExperimentConfig",
    "TrialRecord",
    "SweepPoint",
    "SweepSummary",
    "RegressionResult",
    "ConcentrationResult",
    "CSV_FIELDS",
    "trial_seed",
    "point_seed",
    "make_instance",
    "run_trials",
    "run_paired",
    "summarize",
    "success_curve",
    "minimal_n",
    "sampling_regression",
    "benchmark_sweep",
    "projection_concentration",
    "config_hash",
    "run_dir",
]

CSV_FIELDS = ("sweep_var", "value", "solver", "err", "prr", "err_stderr", "mean_time_s", "bound")
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SolverSpec:
    name: str = "aols"  # ols | aols | omp
    L: int = 1
    epsilon: float = 1e-13
    k_max: int | None = None  # defaults to the signal sparsity
    rel_floor: float = 1e-10

    def __post_init__(self):
        if self.name not in ("ols", "aols", "omp"):
            raise ValueError(f"unknown solver {self.name!r}")
        if self.name != "aols" and self.L != 1:
            raise ValueError(f"L applies to aols only, got L={self.L} for {self.name}")

    @property
    def label(self) -> str:
        return f"aols-L{self.L}" if self.name == "aols" else self.name

    def config(self, k: int) -> SolverConfig:
        return SolverConfig(self.k_max or k, self.epsilon, self.L, self.rel_floor)


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    m: int
    k: int
    solver: SolverSpec = field(default_factory=SolverSpec)
    distribution: str = "gaussian"  # gaussian | hybrid
    T: float = 0.0
    noise: str = "none"  # none | bounded-l2
    eps_nu: float = 0.0
    signal: str = "gaussian"  # gaussian | fixed
    magnitude: float | None = None
    trials: int = 100
    base_seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be >= 1")
        if not 1 <= self.k < self.m:
            raise ValueError(f"need 1 <= k < m, got k={self.k}, m={self.m}")
        if self.distribution not in ("gaussian", "hybrid"):
            raise ValueError(f"unknown distribution {self.distribution!r}")
        if not self.T >= 0:
            raise ValueError("T must be >= 0")
        NoiseSpec(self.noise, self.eps_nu)  # validates the pair
        if self.signal not in ("gaussian", "fixed"):
            raise ValueError(f"unknown signal mode {self.signal!r}")

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class TrialRecord:
    index: int
    seed: int
    exact: bool
    partial: float
    resid_final: float
    elapsed: float
    failed: bool = False  # solver raised a numerical error


@dataclass(frozen=True)
class SweepPoint:
    sweep_var: str
    value: float
    solver: str
    err: float
    prr: float
    err_stderr: float
    mean_time_s: float
    bound: float | None = None

    def row(self) -> list[str]:
        return [
            self.sweep_var,
            _fmt(self.value),
            self.solver,
            _fmt(self.err),
            _fmt(self.prr),
            _fmt(self.err_stderr),
            _fmt(self.mean_time_s),
            "" if self.bound is None else _fmt(self.bound),
        ]


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) or (isinstance(v, float) and v.is_integer() and abs(v) < 1e15):
        return str(int(v))
    return repr(float(v))


@dataclass
class SweepSummary:
    points: list[SweepPoint]
    config: dict = field(default_factory=dict)

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for p in self.points:
            w.writerow(p.row())
        return buf.getvalue()

    def json_text(self) -> str:
        doc = {"config": self.config, "points": [dataclasses.asdict(p) for p in self.points]}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def write(self, directory, stem: str = "summary") -> tuple[Path, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        c, j = directory / f"{stem}.csv", directory / f"{stem}.json"
        c.write_text(self.csv_text())
        j.write_text(self.json_text())
        return c, j

    def series(self, solver: str | None = None) -> list[SweepPoint]:
        return [p for p in self.points if solver is None or p.solver == solver]


def trial_seed(base_seed: int, i: int) -> int:
    return (int(base_seed) ^ int(i)) & _MASK64


def point_seed(base_seed: int, tag: str) -> int:
    return derive_seed(base_seed, tag)


def make_instance(cfg: ExperimentConfig, seed: int):
    """``(A, x, y)`` for one trial; every piece is a pure function of ``seed``."""
    if cfg.distribution == "hybrid":
        A = hybrid_dictionary(cfg.n, cfg.m, cfg.T, seed)
    else:
        A = gaussian_dictionary(cfg.n, cfg.m, seed)
    x = make_signal(cfg.m, cfg.k, seed, mode=cfg.signal, magnitude=cfg.magnitude)
    y = A.entries @ x.values + make_noise(cfg.n, NoiseSpec(cfg.noise, cfg.eps_nu, seed))
    return A, x, y


def _score(truth: set, res) -> tuple[bool, float]:
    got = res.support_set()
    return got == truth, len(got & truth) / len(truth)


def _run_one(cfg: ExperimentConfig, solvers, i: int):
    seed = trial_seed(cfg.base_seed, i)
    A, x, y = make_instance(cfg, seed)
    truth = set(x.support.tolist())
    out = []
    for spec in solvers:
        t0 = time.perf_counter()
        try:
            res = solve(spec.name, A, y, spec.config(cfg.k))
        except RecoveryError:
            out.append(TrialRecord(i, seed, False, 0.0, float("nan"), time.perf_counter() - t0, True))
            continue
        elapsed = time.perf_counter() - t0
        exact, partial = _score(truth, res)
        out.append(TrialRecord(i, seed, exact, partial, res.residual_trace[-1], elapsed))
    return out


def _map(fn, items, threads):
    if threads is None or threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))  # map keeps input order


def run_paired(cfg: ExperimentConfig, solvers, threads: int | None = 1, indices=None) -> dict[str, list[TrialRecord]]:
    """Run every solver on the same trial instances; records keyed by solver label."""
    solvers = list(solvers)
    labels = [s.label for s in solvers]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate solver labels {labels}")
    idx = range(cfg.trials) if indices is None else indices
    rows = _map(lambda i: _run_one(cfg, solvers, i), idx, threads)
    return {lab: [r[s] for r in rows] for s, lab in enumerate(labels)}


def run_trials(cfg: ExperimentConfig, threads: int | None = 1) -> list[TrialRecord]:
    return run_paired(cfg, [cfg.solver], threads)[cfg.solver.label]


def summarize(records, sweep_var: str, value, solver: str, bound: float | None = None) -> SweepPoint:
    n = len(records)
    err = sum(r.exact for r in records) / n
    prr = sum(r.partial for r in records) / n
    mean_t = sum(r.elapsed for r in records) / n
    return SweepPoint(sweep_var, value, solver, err, prr, math.sqrt(err * (1 - err) / n), mean_t, bound)


def success_curve(cfg: ExperimentConfig, n_values, bound: bool = True, t: float | None = None,
                  threads: int | None = 1, step: float = 0.01) -> SweepSummary:
    """Empirical exact-recovery rate over an ``n`` sweep with an optional bound overlay.

    ``t`` selects the noisy bound.
    """
    n_values = list(n_values)
    if not n_values or sorted(n_values) != n_values:
        raise ValueError("n sweep must be non-empty and sorted")
    points = []
    for n in n_values:
        c = cfg.replace(n=int(n), base_seed=point_seed(cfg.base_seed, f"curve/n={n}/k={cfg.k}"))
        recs = run_trials(c, threads)
        b = None
        if bound:
            b = best_bound(int(n), cfg.m, cfg.k, cfg.solver.L, noisy=t is not None, t=t, step=step).product
        points.append(summarize(recs, "n", int(n), cfg.solver.label, b))
    return SweepSummary(points, {"experiment": "success_curve", "base": cfg.to_dict(), "n_values": n_values, "t": t})


def _passes(cfg: ExperimentConfig, n: int, target: float, threads, chunk: int = 25):
    """Does the empirical exact-recovery rate at ``n`` reach ``target``?

    Trials run in fixed chunks and stop once too many have failed; the
    verdict equals that of the full run.  Returns ``(verdict, records)``.
    """
    c = cfg.replace(n=int(n), base_seed=point_seed(cfg.base_seed, f"minimal-n/k={cfg.k}/n={n}"))
    allowed = cfg.trials - math.ceil(target * cfg.trials - 1e-9)
    fails = 0
    recs: list[TrialRecord] = []
    for start in range(0, cfg.trials, chunk):
        idx = range(start, min(start + chunk, cfg.trials))
        got = run_paired(c, [c.solver], threads, idx)[c.solver.label]
        recs.extend(got)
        fails += sum(not r.exact for r in got)
        if fails > allowed:
            return False, recs
    return True, recs


def _search(cfg: ExperimentConfig, target: float, threads, n_max: int | None):
    n_max = 4 * cfg.m if n_max is None else n_max
    lo = cfg.k  # treated as failing
    n = cfg.k + 1
    while True:
        ok, recs = _passes(cfg, n, target, threads)
        if ok:
            hi, best = n, recs
            break
        lo = n
        if n >= n_max:
            raise UnreachableTargetError(f"k={cfg.k}: success {target} not reached for n <= {n_max}")
        n = min(n_max, max(n + 1, int(math.ceil(n * 1.5))))
    while hi - lo > 1:
        mid = (lo + hi) // 2
        ok, recs = _passes(cfg, mid, target, threads)
        if ok:
            hi, best = mid, recs
        else:
            lo = mid
    return hi, best


def minimal_n(cfg: ExperimentConfig, target: float, threads: int | None = 1, n_max: int | None = None) -> int:
    """Smallest ``n`` in ``[k+1, n_max]`` with success rate >= ``target``.

    Gallops upward from ``k + 1`` by factors of 1.5, then bisects the last
    bracket to granularity 1.  ``n_max`` defaults to ``4 m``.
    """
    return _search(cfg, target, threads, n_max)[0]


@dataclass
class RegressionResult:
    slope: float
    intercept: float
    r2: float
    slope_origin: float  # fit constrained through the origin
    r2_origin: float
    points: list[dict]
    summary: SweepSummary | None = field(default=None, repr=False)

    def as_dict(self) -> dict:
        keys = ("slope", "intercept", "r2", "slope_origin", "r2_origin", "points")
        return {key: getattr(self, key) for key in keys}


def _fit(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    X = np.column_stack([x, np.ones_like(x)])
    (slope, icpt), *_ = np.linalg.lstsq(X, y, rcond=None)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float(((y - slope * x - icpt) ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    s0 = float(x @ y / (x @ x))
    # uncentred R^2 is the usual summary for a no-intercept fit
    r2_0 = 1.0 - float(((y - s0 * x) ** 2).sum()) / float(y @ y)
    return float(slope), float(icpt), r2, s0, r2_0


def sampling_regression(cfg: ExperimentConfig, k_list, beta2: float = 0.05, threads: int | None = 1) -> RegressionResult:
    """Fit minimal measurement counts against ``k log(m / (k beta^{1/3}))``.

    ``cfg`` fixes ``m``, the solver, the trial count per search point and the
    seed; its ``n`` and ``k`` are overridden.
    """
    if not 0 < beta2 < 1:
        raise ValueError("beta^2 must lie in (0, 1)")
    k_list = list(k_list)
    if len(k_list) < 2:
        raise ValueError("need at least two sparsity levels to fit a line")
    beta = math.sqrt(beta2)
    pts, rows = [], []
    for k in k_list:
        c = cfg.replace(k=int(k), n=int(k) + 1)
        nmin, recs = _search(c, 1.0 - beta2, threads, None)
        pts.append({"k": int(k), "x": int(k) * math.log(cfg.m / (int(k) * beta ** (1.0 / 3.0))), "n_min": nmin})
        rows.append(summarize(recs, "k", int(k), cfg.solver.label))
    slope, icpt, r2, s0, r2_0 = _fit([p["x"] for p in pts], [p["n_min"] for p in pts])
    meta = {"experiment": "regression", "base": cfg.to_dict(), "k_values": k_list, "beta2": beta2}
    return RegressionResult(slope, icpt, r2, s0, r2_0, pts, SweepSummary(rows, meta))


def benchmark_sweep(cfg: ExperimentConfig, k_values, solvers, threads: int | None = 1,
                    warmup: bool = True) -> SweepSummary:
    """ERR / PRR / runtime per solver over a ``k`` sweep, on paired instances."""
    k_values = list(k_values)
    if not k_values or sorted(k_values) != k_values:
        raise ValueError("k sweep must be non-empty and sorted")
    solvers = list(solvers)
    if warmup:
        # one discarded solve per solver so first-call overheads stay out of the timings
        c = cfg.replace(k=k_values[0], trials=1, base_seed=point_seed(cfg.base_seed, "warmup"))
        run_paired(c, solvers, 1)
    points = []
    for k in k_values:
        c = cfg.replace(k=int(k), base_seed=point_seed(cfg.base_seed, f"bench/k={k}"))
        recs = run_paired(c, solvers, threads)
        for s in solvers:
            points.append(summarize(recs[s.label], "k", int(k), s.label))
    meta = {"experiment": "benchmark", "base": cfg.to_dict(), "k_values": k_values,
            "solvers": [dataclasses.asdict(s) for s in solvers]}
    return SweepSummary(points, meta)


@dataclass
class ConcentrationResult:
    mean: float
    mean_stderr: float
    tail_freq: float
    tail_bound: float
    tail_stderr: float

    @property
    def tail_ok(self) -> bool:
        return self.tail_freq <= self.tail_bound + 3 * self.tail_stderr


def projection_concentration(n: int, k: int, samples: int = 10_000, eps: float = 0.5, seed: int = 0,
                         chunk: int = 500) -> ConcentrationResult:
    """Empirical law of ``||P_k u||^2`` for ``P_k`` projecting onto ``span(A_k)``.

    ``A_k`` (``n x k``) and ``u`` have i.i.d. N(0, 1/n) entries and are drawn
    independently per sample.  The band is ``((1-eps) k/n, (1+eps) k/n)``
    and its complement has probability at most ``2 exp(-k c0(eps))``.
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = rng_for(seed, "projection")
    vals = np.empty(samples)
    sd = 1.0 / math.sqrt(n)
    for start in range(0, samples, chunk):
        b = min(chunk, samples - start)
        Ak = rng.standard_normal((b, n, k)) * sd
        u = rng.standard_normal((b, n)) * sd
        Q, _ = np.linalg.qr(Ak)
        proj = np.einsum("bnk,bn->bk", Q, u)
        vals[start:start + b] = np.einsum("bk,bk->b", proj, proj)
    centre = k / n
    out = (vals <= (1 - eps) * centre) | (vals >= (1 + eps) * centre)
    f = float(out.mean())
    return ConcentrationResult(
        float(vals.mean()),
        float(vals.std(ddof=1) / math.sqrt(samples)),
        f,
        2.0 * math.exp(-k * c0(eps)),
        math.sqrt(max(f * (1 - f), 1.0 / samples) / samples),
    )


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def run_dir(root, config: dict) -> Path:
    """Directory ``root/run-<hash>`` for ``config``; created if missing."""
    p = Path(root) / f"run-{config_hash(config)}"
    os.makedirs(p, exist_ok=True)
    return p
