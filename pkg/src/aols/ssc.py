"""Sparse subspace clustering with AOLS as the self-expressive coder.

Points are the columns of a ``D x N`` matrix.  Each point is coded against
all the others (``x_j = sum_i C_ij x_i``, ``C_jj = 0``), the coefficients
become the affinity ``|C| + |C|^T`` and spectral clustering segments it.
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import RecoveryError
from .linalg import derive_seed, rng_for
from .solvers import SolverConfig, aols_solve, omp_solve
from .spectral import spectral_cluster

__all__ = [
    "SubspaceParams",
    "SubspaceDataset",
    "Representation",
    "ClusterResult",
    "generate_union",
    "self_representation",
    "affinity",
    "evaluate",
    "best_accuracy",
    "assc_pipeline",
    "save_dataset",
    "load_dataset",
]


@dataclass(frozen=True)
class SubspaceParams:
    n_sub: int = 5
    d: int = 6
    D: int = 9
    N_i: int = 50
    perturbation: str = "none"  # none | uniform

    def __post_init__(self):
        for name in ("n_sub", "d", "D", "N_i"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.d < self.D:
            raise ValueError(f"need d < D, got d={self.d}, D={self.D}")
        if self.perturbation not in ("none", "uniform"):
            raise ValueError(f"unknown perturbation {self.perturbation!r}")

    @property
    def N(self) -> int:
        return self.n_sub * self.N_i


@dataclass
class SubspaceDataset:
    points: np.ndarray  # D x N
    labels: np.ndarray  # N
    params: SubspaceParams | None = None
    bases: list = field(default_factory=list)  # D x d orthonormal bases


def generate_union(params: SubspaceParams, seed: int) -> SubspaceDataset:
    """Points drawn uniformly from the unit sphere of random d-dim subspaces.

    With ``perturbation="uniform"`` every point gets ``Q * 1_D`` added,
    ``Q ~ U(0, 1)`` per point, after sampling (no renormalisation).
    """
    rng = rng_for(seed, "ssc/union")
    D, d = params.D, params.d
    bases, blocks, labels = [], [], []
    for s in range(params.n_sub):
        B, _ = np.linalg.qr(rng.standard_normal((D, d)))
        z = rng.standard_normal((d, params.N_i))
        z /= np.linalg.norm(z, axis=0, keepdims=True)
        bases.append(B)
        blocks.append(B @ z)
        labels.append(np.full(params.N_i, s))
    X = np.hstack(blocks)
    if params.perturbation == "uniform":
        X = X + rng.random(X.shape[1])[None, :]
    return SubspaceDataset(X, np.concatenate(labels), params, bases)


@dataclass
class Representation:
    C: np.ndarray  # N x N, column j codes point j
    failed: np.ndarray  # columns whose solver raised
    residuals: np.ndarray
    k_max: int = 0  # iteration budget actually used

    @property
    def n_failed(self) -> int:
        return int(self.failed.sum())


_CODERS = {"aols": aols_solve, "omp": omp_solve}


def self_representation(X, L: int = 2, k_max: int = 7, eps: float = 1e-8, coder: str = "aols",
                        threads: int | None = 1) -> Representation:
    """Code every point against all other points with a greedy solver.

    The iteration budget is clamped to ``floor(D / L)`` so at most ``D``
    helpers are ever selected; beyond that any point is trivially
    expressible and the extra coefficients carry no subspace information.
    A column whose solve fails numerically is left at zero and flagged.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a D x N matrix")
    D, N = X.shape
    if N < 2:
        raise ValueError("need at least two points")
    try:
        fn = _CODERS[coder]
    except KeyError:
        raise ValueError(f"unknown coder {coder!r}") from None
    if coder == "omp" and L != 1:
        L = 1
    k_used = max(1, min(int(k_max), D // L))
    cfg = SolverConfig(k_used, eps, L)
    C = np.zeros((N, N))
    failed = np.zeros(N, dtype=bool)
    resid = np.zeros(N)

    def one(j):
        others = np.delete(np.arange(N), j)
        try:
            res = fn(X[:, others], X[:, j], cfg)
        except (RecoveryError, ValueError):
            return j, others, None, float(np.linalg.norm(X[:, j]))
        return j, others, res.x_hat, res.residual_trace[-1]

    if threads and threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(N)))
    else:
        rows = [one(j) for j in range(N)]
    for j, others, coef, r in rows:
        resid[j] = r
        if coef is None:
            failed[j] = True
        else:
            C[others, j] = coef
    return Representation(C, failed, resid, k_used)


def affinity(C) -> np.ndarray:
    """``|C| + |C|^T`` with the diagonal forced to zero."""
    A = np.abs(np.asarray(C, dtype=float))
    W = A + A.T
    np.fill_diagonal(W, 0.0)
    return W


def best_accuracy(labels_hat, labels_true) -> float:
    """Agreement under the best one-to-one relabelling of ``labels_hat``."""
    a = np.asarray(labels_hat)
    b = np.asarray(labels_true)
    if a.shape != b.shape:
        raise ValueError("label vectors differ in length")
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    K = max(len(ua), len(ub))
    M = np.zeros((K, K), dtype=int)
    np.add.at(M, (ia, ib), 1)
    if K <= 8:
        rows = np.arange(K)
        best = max(M[rows, list(p)].sum() for p in itertools.permutations(range(K)))
    else:
        r, c = linear_sum_assignment(-M)
        best = M[r, c].sum()
    return float(best) / a.size


def evaluate(C, labels_hat, labels_true, tol: float = 1e-10) -> dict:
    """Accuracy, subspace-preserving rate (spr) and error (spe).

    A coefficient counts as nonzero when it exceeds ``tol`` times the largest
    magnitude in its column.  Zero columns are non-preserving and are left
    out of the spe average.
    """
    C = np.asarray(C, dtype=float)
    y = np.asarray(labels_true)
    N = C.shape[0]
    if C.shape != (N, N) or y.shape != (N,):
        raise ValueError("C must be N x N with N true labels")
    A = np.abs(C)
    same = y[:, None] == y[None, :]
    l1 = A.sum(axis=0)
    top = A.max(axis=0)
    nz = A > tol * top[None, :]
    live = l1 > 0
    preserving = live & ~(nz & ~same).any(axis=0)
    spr = float(preserving.mean())
    cross = (A * ~same).sum(axis=0)
    spe = float((cross[live] / l1[live]).mean()) if live.any() else 0.0
    return {"accuracy": best_accuracy(labels_hat, y), "spr": spr, "spe": spe}


@dataclass
class ClusterResult:
    labels_hat: np.ndarray
    accuracy: float
    spr: float
    spe: float
    elapsed: float
    time_repr_s: float = 0.0
    time_spectral_s: float = 0.0
    failed_columns: int = 0

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "spr": self.spr,
            "spe": self.spe,
            "time_repr_s": self.time_repr_s,
            "time_spectral_s": self.time_spectral_s,
            "failed_columns": self.failed_columns,
            "labels_hat": [int(v) for v in self.labels_hat],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"


def assc_pipeline(params: SubspaceParams, L: int = 2, k_max: int | None = None, eps: float = 1e-8,
                  seed: int = 0, coder: str = "aols", threads: int | None = 1,
                  data: SubspaceDataset | None = None) -> ClusterResult:
    """Generate, code, build the affinity, cluster and score.

    ``k_max`` defaults to ``d + 1``.
    """
    t0 = time.perf_counter()
    ds = data if data is not None else generate_union(params, derive_seed(seed, "ssc/data"))
    k_max = params.d + 1 if k_max is None else k_max
    rep = self_representation(ds.points, L, k_max, eps, coder, threads)
    t1 = time.perf_counter()
    W = affinity(rep.C)
    labels = spectral_cluster(W, params.n_sub, derive_seed(seed, "ssc/spectral"))
    t2 = time.perf_counter()
    m = evaluate(rep.C, labels, ds.labels)
    return ClusterResult(labels, m["accuracy"], m["spr"], m["spe"], t2 - t0, t1 - t0, t2 - t1, rep.n_failed)


def save_dataset(ds: SubspaceDataset, points_path, labels_path) -> None:
    """Points as D rows x N columns and labels as a single row, both plain CSV."""
    np.savetxt(points_path, ds.points, delimiter=",", fmt="%.17g")
    np.savetxt(labels_path, ds.labels[None, :], delimiter=",", fmt="%d")


def load_dataset(points_path, labels_path) -> SubspaceDataset:
    X = np.loadtxt(points_path, delimiter=",", ndmin=2)
    y = np.loadtxt(labels_path, delimiter=",", dtype=int, ndmin=1).reshape(-1)
    if X.shape[1] != y.size:
        raise ValueError(f"{Path(points_path).name} has {X.shape[1]} points but {y.size} labels")
    return SubspaceDataset(X, y)
