"""Command-line front end.

    python -m aols recover   --solver aols --n 64 --m 128 --k 8 --L 2 --seed 7
    python -m aols benchmark --config curve.json --out-dir runs
    python -m aols bounds    --n 700 --m 1000 --k 5
    python -m aols ssc       --config ssc.json

Config files are flat JSON objects; command-line flags override their values
and unknown keys are rejected.  Exit codes: 0 success, 2 invalid input,
3 numerical degeneracy, 4 I/O failure.  Indices in outputs are 0-based.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import bounds as bnd
from . import harness as hz
from . import ssc as sscm
from .exceptions import RecoveryError, UnreachableTargetError
from .linalg import NoiseSpec, gaussian_dictionary, hybrid_dictionary, make_noise, make_signal
from .solvers import SolverConfig, solve

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---- config handling -------------------------------------------------------

def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    for key, val in cfg.items():
        if isinstance(val, dict):
            raise UsageError(f"{path}: key {key!r} is nested; configs are flat")
    return cfg


def _merge(file_cfg: dict, args: argparse.Namespace, allowed: dict) -> dict:
    """File values, then flag values that were given, then defaults."""
    unknown = sorted(set(file_cfg) - set(allowed))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    out = dict(allowed)
    out.update(file_cfg)
    for key in allowed:
        v = getattr(args, key, None)
        if v is not None:
            out[key] = v
    return out


def _need(cfg: dict, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise UsageError(f"missing required parameter(s): {', '.join('--' + k for k in missing)}")


def _int(cfg, key, lo=None):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or float(v) != int(v):
        raise UsageError(f"{key} must be an integer, got {v!r}")
    v = int(v)
    if lo is not None and v < lo:
        raise UsageError(f"{key} must be >= {lo}, got {v}")
    return v


def _float(cfg, key, lo=None, hi=None, open_lo=False):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise UsageError(f"{key} must be a finite number, got {v!r}")
    v = float(v)
    if lo is not None and (v < lo or (open_lo and v == lo)):
        raise UsageError(f"{key} must be {'>' if open_lo else '>='} {lo}, got {v}")
    if hi is not None and v > hi:
        raise UsageError(f"{key} must be <= {hi}, got {v}")
    return v


def _choice(cfg, key, options):
    v = cfg[key]
    if v not in options:
        raise UsageError(f"{key} must be one of {', '.join(options)}, got {v!r}")
    return v


def read_matrix_csv(path) -> np.ndarray:
    """Plain comma-separated numbers, row-major, no header."""
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(tok) for tok in line.split(",")]
            except ValueError:
                raise UsageError(f"{path}:{lineno}: non-numeric field") from None
            if not all(math.isfinite(v) for v in row):
                raise UsageError(f"{path}:{lineno}: non-finite value")
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise UsageError(f"{path}:{lineno}: expected {width} fields, found {len(row)}")
            rows.append(row)
    if not rows:
        raise UsageError(f"{path}: no data")
    return np.array(rows)


def _emit(doc: dict, out) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _threads(v):
    if v is None:
        return os.cpu_count() or 1
    return max(1, int(v))


# ---- recover ---------------------------------------------------------------

RECOVER_KEYS = {
    "solver": "aols", "n": None, "m": None, "k": None, "L": 1, "eps": 1e-13, "seed": 0,
    "distribution": "gaussian", "T": 0.0, "eps_nu": 0.0, "A": None, "y": None, "out": None,
}


def cmd_recover(args) -> int:
    cfg = _merge(_load_config(args.config), args, RECOVER_KEYS)
    solver = _choice(cfg, "solver", ("ols", "aols", "omp"))
    _need(cfg, "k")
    k = _int(cfg, "k", 1)
    L = _int(cfg, "L", 1)
    eps = _float(cfg, "eps", 0.0)
    seed = _int(cfg, "seed", 0)
    truth = None
    if cfg["A"] is not None or cfg["y"] is not None:
        _need(cfg, "A", "y")
        A = read_matrix_csv(cfg["A"])
        y = read_matrix_csv(cfg["y"]).reshape(-1)
        if y.size != A.shape[0]:
            raise UsageError(f"y has {y.size} entries but A has {A.shape[0]} rows")
    else:
        _need(cfg, "n", "m")
        n, m = _int(cfg, "n", 1), _int(cfg, "m", 1)
        if not k < m:
            raise UsageError(f"k must be < m, got k={k}, m={m}")
        dist = _choice(cfg, "distribution", ("gaussian", "hybrid"))
        T = _float(cfg, "T", 0.0)
        eps_nu = _float(cfg, "eps_nu", 0.0)
        A = hybrid_dictionary(n, m, T, seed) if dist == "hybrid" else gaussian_dictionary(n, m, seed)
        x = make_signal(m, k, seed)
        noise = NoiseSpec("bounded-l2", eps_nu, seed) if eps_nu > 0 else NoiseSpec()
        y = A.entries @ x.values + make_noise(n, noise)
        truth = [int(j) for j in x.support]
    if solver == "aols" and L > A.shape[0]:
        raise UsageError(f"L={L} exceeds n={A.shape[0]}")
    res = solve(solver, A, y, SolverConfig(k, eps, L if solver == "aols" else 1))
    doc = {
        "support": res.support,
        "selected": res.selected,
        "x_hat": res.x_hat.tolist(),
        "residual_trace": res.residual_trace,
        "iterations": res.iterations,
        "elapsed": res.elapsed,
    }
    if truth is not None:
        doc["true_support"] = truth
        doc["exact"] = res.support_set() == set(truth)
    _emit(doc, cfg["out"])
    return EXIT_OK


# ---- benchmark -------------------------------------------------------------

BENCH_KEYS = {
    "experiment": "curve", "n": None, "m": None, "k": None, "solver": "aols", "L": 1, "eps": 1e-13,
    "solvers": None, "distribution": "gaussian", "T": 0.0, "noise": "none", "eps_nu": 0.0,
    "signal": "gaussian", "magnitude": None, "trials": 100, "seed": 0, "n_values": None,
    "k_values": None, "bound": True, "t": None, "beta2": 0.05, "step": 0.01, "out_dir": "runs",
    "threads": None,
}


def _solver_spec(label: str, eps: float) -> hz.SolverSpec:
    if label in ("ols", "omp"):
        return hz.SolverSpec(label, 1, eps)
    if label == "aols":
        return hz.SolverSpec("aols", 1, eps)
    if label.startswith("aols-L") and label[6:].isdigit() and int(label[6:]) >= 1:
        return hz.SolverSpec("aols", int(label[6:]), eps)
    raise UsageError(f"unknown solver label {label!r} (use ols, omp, aols or aols-L<k>)")


def _int_list(cfg, key):
    v = cfg[key]
    if isinstance(v, str):
        v = [tok for tok in v.split(",") if tok.strip()]
    if not isinstance(v, list) or not v:
        raise UsageError(f"{key} must be a non-empty list of integers")
    try:
        out = [int(tok) for tok in v]
    except (TypeError, ValueError):
        raise UsageError(f"{key} must contain integers only") from None
    if out != sorted(out) or len(set(out)) != len(out):
        raise UsageError(f"{key} must be strictly increasing")
    return out


def _experiment(cfg) -> tuple[str, hz.ExperimentConfig, dict]:
    kind = _choice(cfg, "experiment", ("curve", "regression", "benchmark"))
    _need(cfg, "m")
    m = _int(cfg, "m", 2)
    eps = _float(cfg, "eps", 0.0)
    L = _int(cfg, "L", 1)
    name = _choice(cfg, "solver", ("ols", "aols", "omp"))
    spec = _solver_spec(name if name != "aols" or L == 1 else f"aols-L{L}", eps)
    extra = {}
    if kind == "curve":
        _need(cfg, "k", "n_values")
        k = _int(cfg, "k", 1)
        extra["n_values"] = _int_list(cfg, "n_values")
        if extra["n_values"][0] < 1:
            raise UsageError("n_values must be positive")
        n = extra["n_values"][0]
    elif kind == "regression":
        _need(cfg, "k_values")
        extra["k_values"] = _int_list(cfg, "k_values")
        k, n = extra["k_values"][0], extra["k_values"][0] + 1
        extra["beta2"] = _float(cfg, "beta2", 0.0, 1.0, open_lo=True)
        if extra["beta2"] >= 1.0:
            raise UsageError("beta2 must be < 1")
    else:
        _need(cfg, "n", "k_values")
        n = _int(cfg, "n", 1)
        extra["k_values"] = _int_list(cfg, "k_values")
        k = extra["k_values"][0]
        labels = cfg["solvers"] or [spec.label]
        if isinstance(labels, str):
            labels = [s.strip() for s in labels.split(",") if s.strip()]
        extra["solvers"] = [_solver_spec(s, eps) for s in labels]
    ks = extra.get("k_values", [k])
    if ks[0] < 1 or ks[-1] >= m:
        raise UsageError(f"every k must satisfy 1 <= k < m={m}")
    t = None if cfg["t"] is None else _float(cfg, "t", 0.0, open_lo=True)
    extra["t"] = t
    extra["bound"] = bool(cfg["bound"])
    extra["step"] = _float(cfg, "step", 0.0, 0.5, open_lo=True)
    mag = None if cfg["magnitude"] is None else _float(cfg, "magnitude")
    try:
        exp = hz.ExperimentConfig(
            n=n, m=m, k=k, solver=spec,
            distribution=_choice(cfg, "distribution", ("gaussian", "hybrid")),
            T=_float(cfg, "T", 0.0), noise=_choice(cfg, "noise", ("none", "bounded-l2")),
            eps_nu=_float(cfg, "eps_nu", 0.0), signal=_choice(cfg, "signal", ("gaussian", "fixed")),
            magnitude=mag, trials=_int(cfg, "trials", 1), base_seed=_int(cfg, "seed", 0),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if exp.signal == "fixed" and not mag:
        raise UsageError("signal=fixed needs a nonzero magnitude")
    return kind, exp, extra


def cmd_benchmark(args) -> int:
    cfg = _merge(_load_config(args.config), args, BENCH_KEYS)
    kind, exp, extra = _experiment(cfg)
    threads = _threads(cfg["threads"])
    if kind == "curve":
        summary = hz.success_curve(exp, extra["n_values"], extra["bound"], extra["t"], threads, extra["step"])
        reg = None
    elif kind == "regression":
        reg = hz.sampling_regression(exp, extra["k_values"], extra["beta2"], threads)
        summary = reg.summary
    else:
        summary = hz.benchmark_sweep(exp, extra["k_values"], extra["solvers"], threads)
        reg = None
    key = {k: cfg[k] for k in sorted(cfg) if k not in ("out_dir", "threads")}
    out = hz.run_dir(cfg["out_dir"], key)
    (out / "config.json").write_text(json.dumps(key, indent=2, sort_keys=True) + "\n")
    summary.write(out)
    if reg is not None:
        (out / "regression.json").write_text(json.dumps(reg.as_dict(), indent=2, sort_keys=True) + "\n")
    print(out)
    return EXIT_OK


# ---- bounds ----------------------------------------------------------------

BOUNDS_KEYS = {"n": None, "m": None, "k": None, "L": 1, "eps": None, "delta": None, "t": None,
               "noisy": False, "step": 0.01, "out": None}


def cmd_bounds(args) -> int:
    cfg = _merge(_load_config(args.config), args, BOUNDS_KEYS)
    _need(cfg, "n", "m", "k")
    n, m, k, L = _int(cfg, "n", 1), _int(cfg, "m", 1), _int(cfg, "k", 1), _int(cfg, "L", 1)
    noisy = bool(cfg["noisy"]) or cfg["t"] is not None
    t = None if cfg["t"] is None else _float(cfg, "t", 0.0, open_lo=True)
    if noisy and t is None:
        raise UsageError("the noisy bound needs --t")
    if (cfg["eps"] is None) != (cfg["delta"] is None):
        raise UsageError("give both --eps and --delta, or neither for the grid maximum")
    try:
        if cfg["eps"] is None:
            v = bnd.best_bound(n, m, k, L, noisy, t, _float(cfg, "step", 0.0, 0.5, open_lo=True))
        else:
            p = bnd.BoundParams(n, m, k, L, _float(cfg, "eps"), _float(cfg, "delta"), t)
            v = bnd.noisy_bound(p) if noisy else bnd.noiseless_bound(p)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(v.as_dict(), cfg["out"])
    return EXIT_OK


# ---- ssc -------------------------------------------------------------------

SSC_KEYS = {"n_sub": 5, "d": 6, "D": 9, "N_i": 50, "perturbation": "none", "L": 2, "k_max": None,
            "eps": 1e-8, "coder": "aols", "seed": 0, "out": None, "threads": None}


def cmd_ssc(args) -> int:
    cfg = _merge(_load_config(args.config), args, SSC_KEYS)
    try:
        params = sscm.SubspaceParams(
            _int(cfg, "n_sub", 1), _int(cfg, "d", 1), _int(cfg, "D", 2), _int(cfg, "N_i", 1),
            _choice(cfg, "perturbation", ("none", "uniform")),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if params.N < 2:
        raise UsageError("need at least two points in total")
    L = _int(cfg, "L", 1)
    if L > params.D:
        raise UsageError(f"L={L} exceeds D={params.D}")
    k_max = None if cfg["k_max"] is None else _int(cfg, "k_max", 1)
    eps = _float(cfg, "eps", 0.0)
    coder = _choice(cfg, "coder", ("aols", "omp"))
    seed = _int(cfg, "seed", 0)
    res = sscm.assc_pipeline(params, L, k_max, eps, seed, coder, _threads(cfg["threads"]))
    _emit(res.as_dict(), cfg["out"])
    return EXIT_OK


# ---- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="aols", description="Greedy sparse recovery, bounds, benchmarks and subspace clustering.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("recover", help="solve one instance, generated or read from CSV")
    r.add_argument("--config")
    r.add_argument("--solver", choices=("ols", "aols", "omp"))
    for name in ("n", "m", "k", "L", "seed"):
        r.add_argument(f"--{name}", type=int)
    r.add_argument("--eps", type=float, help="residual-norm stopping threshold")
    r.add_argument("--distribution", choices=("gaussian", "hybrid"))
    r.add_argument("--T", type=float)
    r.add_argument("--eps-nu", dest="eps_nu", type=float)
    r.add_argument("--A", help="dictionary CSV")
    r.add_argument("--y", help="measurement CSV")
    r.add_argument("--out")
    r.set_defaults(func=cmd_recover)

    b = sub.add_parser("benchmark", help="run a Monte-Carlo sweep and write CSV/JSON")
    b.add_argument("--config")
    b.add_argument("--experiment", choices=("curve", "regression", "benchmark"))
    for name in ("n", "m", "k", "L", "trials", "seed", "threads"):
        b.add_argument(f"--{name}", type=int)
    b.add_argument("--solver", choices=("ols", "aols", "omp"))
    b.add_argument("--solvers", help="comma-separated labels, e.g. aols-L3,omp")
    b.add_argument("--eps", type=float)
    b.add_argument("--n-values", dest="n_values")
    b.add_argument("--k-values", dest="k_values")
    b.add_argument("--distribution", choices=("gaussian", "hybrid"))
    b.add_argument("--T", type=float)
    b.add_argument("--beta2", type=float)
    b.add_argument("--t", type=float)
    b.add_argument("--out-dir", dest="out_dir")
    b.set_defaults(func=cmd_benchmark)

    bd = sub.add_parser("bounds", help="evaluate the success-probability lower bound")
    bd.add_argument("--config")
    for name in ("n", "m", "k", "L"):
        bd.add_argument(f"--{name}", type=int)
    bd.add_argument("--eps", type=float)
    bd.add_argument("--delta", type=float)
    bd.add_argument("--t", type=float)
    bd.add_argument("--noisy", action="store_true", default=None)
    bd.add_argument("--step", type=float)
    bd.add_argument("--out")
    bd.set_defaults(func=cmd_bounds)

    s = sub.add_parser("ssc", help="run the subspace-clustering pipeline")
    s.add_argument("--config")
    for name in ("n_sub", "d", "D", "N_i", "L", "k_max", "seed", "threads"):
        s.add_argument(f"--{name.replace('_', '-')}", dest=name, type=int)
    s.add_argument("--perturbation", choices=("none", "uniform"))
    s.add_argument("--eps", type=float)
    s.add_argument("--coder", choices=("aols", "omp"))
    s.add_argument("--out")
    s.set_defaults(func=cmd_ssc)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (RecoveryError, UnreachableTargetError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
