"""Greedy sparse recovery: OLS, accelerated OLS (AOLS), OMP, and exhaustive search.

All solvers share one stopping rule, checked before every iteration: keep going
while ``||r||_2 >= max(epsilon, rel_floor * ||y||_2)`` and fewer than ``k_max``
iterations have run.  The relative floor sits above the level double precision
can resolve for ill-conditioned supports; below it further picks fit rounding
noise.  A solver also stops once the selected columns span the whole
measurement space.
Ties in any argmax / top-L choice go to the smallest column index.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.blas import dger

from .exceptions import DegenerateDictionaryError, InstanceTooLargeError, SingularSystemError
from .linalg import as_matrix, least_squares

__all__ = [
    "SolverConfig",
    "RecoveryResult",
    "SolverState",
    "ols_solve",
    "aols_solve",
    "omp_solve",
    "brute_force_best_subset",
    "solve",
    "SOLVERS",
    "BRUTE_FORCE_LIMIT",
]

DEFAULT_EPSILON = 1e-13
DEFAULT_REL_FLOOR = 1e-10
# A column whose deflated part is this small relative to itself lies in the selected span.
SPAN_TOL = 1e-12
# |a_j^T t_j| below DENOM_TOL * ||a_j|| ||t_j|| makes the q_j formula undefined.
DENOM_TOL = 1e-12
# Basis size after which every new direction gets a full re-orthogonalisation pass.
REORTH_AFTER = 50
BRUTE_FORCE_LIMIT = 10**6


@dataclass(frozen=True)
class SolverConfig:
    k_max: int
    epsilon: float = DEFAULT_EPSILON
    L: int = 1
    rel_floor: float = DEFAULT_REL_FLOOR

    def __post_init__(self):
        if int(self.k_max) < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max}")
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0 <= self.rel_floor < 1:
            raise ValueError(f"rel_floor must lie in [0, 1), got {self.rel_floor}")
        if int(self.L) < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")


@dataclass
class SolverState:
    """Final internal state of an AOLS run, kept for diagnostics."""

    residual: np.ndarray
    u: np.ndarray  # (n, s) residual decrements, one column per selected index
    basis: np.ndarray  # (n, s) orthonormal directions spanning the selected columns
    deflated: np.ndarray  # (n, m) columns t_j after the last deflation
    selected: list[int]


@dataclass
class RecoveryResult:
    support: list[list[int]]
    x_hat: np.ndarray
    residual_trace: list[float]
    iterations: int
    elapsed: float
    state: SolverState | None = field(default=None, repr=False)

    @property
    def selected(self) -> list[int]:
        """Selected indices in selection order."""
        return [j for batch in self.support for j in batch]

    def support_set(self, rel_tol: float = 1e-8) -> set[int]:
        """Selected indices whose coefficient is not negligible.

        With ``L > 1`` a successful run may select a few extra columns whose
        least-squares coefficients vanish; those are dropped here.
        """
        sel = self.selected
        if not sel:
            return set()
        coef = np.abs(self.x_hat[sel])
        top = coef.max()
        if top == 0.0:
            return set()
        return {j for j, c in zip(sel, coef) if c > rel_tol * top}


def _prepare(A, y, cfg: SolverConfig):
    A = as_matrix(A)
    y = np.asarray(y, dtype=float)
    n, m = A.shape
    if y.shape != (n,):
        raise ValueError(f"y has shape {y.shape}, expected ({n},)")
    if not np.all(np.isfinite(y)):
        raise ValueError("y must be finite")
    if not np.all(np.isfinite(A)):
        raise ValueError("dictionary entries must be finite")
    return A, y, n, m


def _threshold(cfg: SolverConfig, y) -> float:
    return max(cfg.epsilon, cfg.rel_floor * float(np.linalg.norm(y)))


def _final_estimate(A, y, selected, m):
    x_hat = np.zeros(m)
    if selected:
        try:
            x_hat[selected] = least_squares(A[:, selected], y)
        except SingularSystemError as exc:
            raise DegenerateDictionaryError(str(exc)) from exc
    return x_hat


def ols_solve(A, y, cfg: SolverConfig) -> RecoveryResult:
    """Classical OLS with an explicit orthogonal-complement projector.

    Each iteration forms ``P a_j`` for every column (O(m n^2)), picks the
    column maximising ``|y^T P a_j| / ||P a_j||`` and applies the rank-one
    projector update ``P <- P - (P a)(P a)^T / ||P a||^2``.
    """
    A, y, n, m = _prepare(A, y, cfg)
    t0 = time.perf_counter()
    col_norm = np.linalg.norm(A, axis=0)
    P = np.eye(n)
    selected = np.zeros(m, dtype=bool)
    order: list[int] = []
    r = y.copy()
    trace = [float(np.linalg.norm(r))]
    stop = _threshold(cfg, y)
    it = 0
    while trace[-1] >= stop and it < cfg.k_max and len(order) < n:
        PA = P @ A
        pn2 = np.einsum("ij,ij->j", PA, PA)
        usable = ~selected & (np.sqrt(pn2) > SPAN_TOL * col_norm)
        if not usable.any():
            raise DegenerateDictionaryError("every remaining column lies in the selected span")
        score = np.full(m, -1.0)
        corr = y @ PA
        score[usable] = corr[usable] ** 2 / pn2[usable]
        j = int(np.argmax(score))
        p = PA[:, j]
        P -= np.outer(p, p) / pn2[j]
        selected[j] = True
        order.append(j)
        r = P @ y
        it += 1
        trace.append(float(np.linalg.norm(r)))
    x_hat = _final_estimate(A, y, order, m)
    return RecoveryResult([[j] for j in order], x_hat, trace, it, time.perf_counter() - t0)


def _top(score: np.ndarray, count: int) -> np.ndarray:
    if count == 1:
        return np.array([int(np.argmax(score))])  # argmax returns the first maximum
    # stable sort on the negated score: equal scores keep ascending index order
    return np.argsort(-score, kind="stable")[:count]


def aols_solve(A, y, cfg: SolverConfig) -> RecoveryResult:
    """Accelerated OLS: OLS selection through rank-one recursions, L columns per step.

    Candidates are scored by ``||q_j||`` where
    ``q_j = (a_j^T r) / (a_j^T t_j) * t_j`` and ``t_j`` is column ``j``
    deflated against the directions chosen so far.  The ``L`` best columns
    are absorbed one at a time in descending-score order; each is first
    orthogonalised against the batch members already absorbed, its
    ``u = q_j`` is recomputed with the current residual and ``r <- r - u``.
    All deflated columns are then updated against the new directions.

    Per iteration the work is O(m n L), against O(m n^2) for :func:`ols_solve`.
    ``L * k_max`` may exceed ``n``; the run then stops once ``n`` columns
    are selected.
    """
    A, y, n, m = _prepare(A, y, cfg)
    if cfg.L > n:
        raise ValueError(f"L={cfg.L} exceeds the number of measurements n={n}")
    t0 = time.perf_counter()
    col_norm = np.linalg.norm(A, axis=0)
    T = np.array(A, dtype=float, order="F", copy=True)
    # a_j^T t_j and ||t_j||^2, carried through the deflation recursion
    d = col_norm**2
    tn2 = d.copy()
    r = y.copy()
    selected = np.zeros(m, dtype=bool)
    excluded = np.zeros(m, dtype=bool)
    order: list[int] = []
    batches: list[list[int]] = []
    us: list[np.ndarray] = []
    basis: list[np.ndarray] = []
    trace = [float(np.linalg.norm(r))]
    stop = _threshold(cfg, y)
    it = 0
    while trace[-1] >= stop and it < cfg.k_max and len(order) < n:
        g = r @ A  # a_j^T r
        tn = np.sqrt(np.maximum(tn2, 0.0))
        usable = (
            ~selected & ~excluded & (tn > SPAN_TOL * col_norm) & (np.abs(d) >= DENOM_TOL * col_norm * tn)
        )
        n_usable = int(usable.sum())
        if n_usable == 0:
            raise DegenerateDictionaryError("no column has a usable projection onto the residual complement")
        score = np.full(m, -1.0)
        # ||q_j||^2, compared squared
        score[usable] = (g[usable] / d[usable]) ** 2 * tn2[usable]
        picks = _top(score, min(cfg.L, n_usable, n - len(order)))

        batch: list[int] = []
        fresh: list[np.ndarray] = []
        for j in picks:
            j = int(j)
            a = A[:, j]
            t = T[:, j].copy()
            for b in fresh:
                t -= (b @ t) * b
            if len(basis) > REORTH_AFTER:
                B = np.column_stack(basis)
                t -= B @ (B.T @ t)
            t_norm = float(np.linalg.norm(t))
            denom = float(a @ t)
            if t_norm <= SPAN_TOL * col_norm[j] or abs(denom) < DENOM_TOL * col_norm[j] * t_norm:
                excluded[j] = True
                continue
            u = ((a @ r) / denom) * t
            r = r - u
            us.append(u)
            direction = t / t_norm
            basis.append(direction)
            fresh.append(direction)
            selected[j] = True
            order.append(j)
            batch.append(j)
        if not batch:
            # every pick was newly excluded; rescore without them
            continue
        for b in fresh:
            w = b @ T  # t_j^T b
            T = dger(-1.0, b, w, a=T, overwrite_a=1)
            d -= (b @ A) * w
            tn2 -= w * w
        it += 1
        batches.append(batch)
        trace.append(float(np.linalg.norm(r)))

    x_hat = _final_estimate(A, y, order, m)
    state = SolverState(
        residual=r,
        u=np.column_stack(us) if us else np.zeros((n, 0)),
        basis=np.column_stack(basis) if basis else np.zeros((n, 0)),
        deflated=T,
        selected=order,
    )
    return RecoveryResult(batches, x_hat, trace, it, time.perf_counter() - t0, state)


def omp_solve(A, y, cfg: SolverConfig) -> RecoveryResult:
    """Orthogonal matching pursuit: pick ``argmax |a_j^T r|`` then refit on the active set."""
    A, y, n, m = _prepare(A, y, cfg)
    t0 = time.perf_counter()
    selected = np.zeros(m, dtype=bool)
    order: list[int] = []
    r = y.copy()
    z = np.zeros(0)
    trace = [float(np.linalg.norm(r))]
    stop = _threshold(cfg, y)
    it = 0
    while trace[-1] >= stop and it < cfg.k_max and len(order) < n:
        corr = np.abs(r @ A)
        corr[selected] = -1.0
        j = int(np.argmax(corr))
        selected[j] = True
        order.append(j)
        A_S = A[:, order]
        try:
            z = least_squares(A_S, y)
        except SingularSystemError as exc:
            raise DegenerateDictionaryError(str(exc)) from exc
        r = y - A_S @ z
        it += 1
        trace.append(float(np.linalg.norm(r)))
    x_hat = np.zeros(m)
    x_hat[order] = z
    return RecoveryResult([[j] for j in order], x_hat, trace, it, time.perf_counter() - t0)


def brute_force_best_subset(A, y, k: int) -> RecoveryResult:
    """Exhaustive minimiser of ``||y - A_S x_S||`` over all supports of size ``k``.

    Supports are visited in lexicographic order and only a strictly smaller
    residual replaces the incumbent, so ties resolve to the lexicographically
    smallest support.  Rank-deficient supports are skipped.
    """
    A = as_matrix(A)
    y = np.asarray(y, dtype=float)
    n, m = A.shape
    if not 1 <= k <= m:
        raise ValueError(f"k must be in [1, m], got k={k}, m={m}")
    count = math.comb(m, k)
    if count > BRUTE_FORCE_LIMIT:
        raise InstanceTooLargeError(f"C({m},{k}) = {count} supports exceeds the limit {BRUTE_FORCE_LIMIT}")
    t0 = time.perf_counter()
    tie = 1e-12 * float(np.linalg.norm(y))
    best = math.inf
    best_support = None
    best_z = None
    for support in itertools.combinations(range(m), k):
        cols = A[:, support]
        try:
            z = least_squares(cols, y)
        except SingularSystemError:
            continue
        res = float(np.linalg.norm(y - cols @ z))
        if res < best - tie:
            best, best_support, best_z = res, support, z
    if best_support is None:
        raise DegenerateDictionaryError(f"every support of size {k} is rank deficient")
    x_hat = np.zeros(m)
    x_hat[list(best_support)] = best_z
    return RecoveryResult([list(best_support)], x_hat, [float(np.linalg.norm(y)), best], 1, time.perf_counter() - t0)


SOLVERS = {"ols": ols_solve, "aols": aols_solve, "omp": omp_solve}


def solve(name: str, A, y, cfg: SolverConfig) -> RecoveryResult:
    try:
        fn = SOLVERS[name]
    except KeyError:
        raise ValueError(f"unknown solver {name!r}; expected one of {sorted(SOLVERS)}") from None
    return fn(A, y, cfg)
