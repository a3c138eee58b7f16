"""Dense linear-algebra primitives and random problem generators.

Every generator is a pure function of its integer seed.  Randomness is drawn
from numpy's PCG64 bit generator; sub-streams are keyed by hashing
``(seed, purpose)`` so that independent quantities (dictionary, signal,
noise, ...) never share a stream.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .exceptions import SingularSystemError

__all__ = [
    "Dictionary",
    "DictionaryGen",
    "NoiseSpec",
    "SparseSignal",
    "derive_seed",
    "rng_for",
    "gaussian_dictionary",
    "hybrid_dictionary",
    "make_signal",
    "make_noise",
    "least_squares",
    "as_matrix",
]

_MASK64 = (1 << 64) - 1

# Columns of a hybrid dictionary are unit norm to this tolerance.
UNIT_NORM_TOL = 1e-12
# Relative pivot size below which a triangular factor is treated as singular.
RCOND_MIN = 1e-10


def derive_seed(seed: int, purpose: str) -> int:
    """Stable 64-bit sub-seed for ``(seed, purpose)``."""
    payload = f"{int(seed) & _MASK64}:{purpose}".encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def rng_for(seed: int, purpose: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, purpose)))


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DictionaryGen:
    distribution: str  # "gaussian" | "hybrid"
    T: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class Dictionary:
    """An ``n x m`` coefficient matrix with its generation metadata."""

    entries: np.ndarray
    gen: DictionaryGen = field(default_factory=lambda: DictionaryGen("gaussian"))

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"dictionary must be a non-empty 2-D matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("dictionary entries must be finite")
        object.__setattr__(self, "entries", _readonly(a))

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.entries
        return self.entries.astype(dtype)


@dataclass(frozen=True)
class SparseSignal:
    """A k-sparse m-vector together with its true support."""

    values: np.ndarray
    support: np.ndarray
    mode: str = "gaussian"  # "gaussian" | "fixed"
    magnitude: float | None = None

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.support.shape[0]


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "none"  # "none" | "bounded-l2"
    eps_nu: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "bounded-l2"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "bounded-l2" and not self.eps_nu > 0:
            raise ValueError("bounded-l2 noise needs eps_nu > 0")


def as_matrix(A) -> np.ndarray:
    """Return the float matrix behind a :class:`Dictionary` or array-like."""
    if isinstance(A, Dictionary):
        return A.entries
    a = np.asarray(A, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    return a


def _check_dims(n: int, m: int) -> None:
    if int(n) < 1 or int(m) < 1:
        raise ValueError(f"dimensions must be positive, got n={n}, m={m}")


def _gaussian_block(n: int, m: int, seed: int) -> np.ndarray:
    # N(0, 1/n) entries: standard normals (ziggurat) scaled by 1/sqrt(n).
    return rng_for(seed, "dictionary/gaussian").standard_normal((n, m)) / np.sqrt(n)


def gaussian_dictionary(n: int, m: int, seed: int) -> Dictionary:
    """Matrix with i.i.d. N(0, 1/n) entries."""
    _check_dims(n, m)
    return Dictionary(_gaussian_block(n, m, seed), DictionaryGen("gaussian", 0.0, int(seed)))


def hybrid_dictionary(n: int, m: int, T: float, seed: int) -> Dictionary:
    """Correlated dictionary with columns ``(b_j + t_j 1) / ||b_j + t_j 1||``.

    ``b_j ~ N(0, I/n)`` and ``t_j ~ U(0, T)`` are drawn from separate streams,
    and ``t_j = T * u_j`` for a fixed uniform draw ``u_j``, so changing ``T``
    with the same seed keeps every ``b_j`` and ``u_j``.  The ``b`` stream is
    the one used by :func:`gaussian_dictionary`; ``T = 0`` therefore gives the
    column-normalised Gaussian matrix of the same seed.
    """
    _check_dims(n, m)
    if not T >= 0:
        raise ValueError(f"T must be non-negative, got {T}")
    b = _gaussian_block(n, m, seed)
    u = rng_for(seed, "dictionary/hybrid-t").random(m)
    cols = b + (float(T) * u)[None, :]
    cols /= np.linalg.norm(cols, axis=0, keepdims=True)
    return Dictionary(cols, DictionaryGen("hybrid", float(T), int(seed)))


def make_signal(m: int, k: int, seed: int, mode: str = "gaussian", magnitude: float | None = None) -> SparseSignal:
    """Draw a k-sparse vector with a uniformly random support.

    ``mode="gaussian"`` draws the nonzeros from N(0, 1); ``mode="fixed"`` sets
    every nonzero to ``magnitude``.
    """
    if not 1 <= k < m:
        raise ValueError(f"k must be < m and >= 1 (got k={k}, m={m})")
    rng = rng_for(seed, "signal")
    support = np.sort(rng.choice(m, size=k, replace=False))
    values = np.zeros(m)
    if mode == "gaussian":
        nz = rng.standard_normal(k)
        while np.any(nz == 0.0):
            nz[nz == 0.0] = rng.standard_normal(int(np.sum(nz == 0.0)))
    elif mode == "fixed":
        if magnitude is None or not magnitude != 0 or not np.isfinite(magnitude):
            raise ValueError("fixed-magnitude signals need a finite nonzero magnitude")
        nz = np.full(k, float(magnitude))
    else:
        raise ValueError(f"unknown signal mode {mode!r}")
    values[support] = nz
    return SparseSignal(_readonly(values), _readonly(support), mode, magnitude)


def make_noise(n: int, spec: NoiseSpec) -> np.ndarray:
    """Noise vector for ``spec``; bounded noise has norm exactly ``eps_nu``."""
    if int(n) < 1:
        raise ValueError(f"n must be positive, got {n}")
    if spec.kind == "none":
        return np.zeros(n)
    rng = rng_for(spec.seed, "noise")
    v = rng.standard_normal(n)
    norm = np.linalg.norm(v)
    while norm == 0.0:
        v = rng.standard_normal(n)
        norm = np.linalg.norm(v)
    return v * (spec.eps_nu / norm)


def least_squares(A_S, y) -> np.ndarray:
    """Minimiser of ``||y - A_S z||_2`` via a reduced QR factorisation.

    Raises :class:`SingularSystemError` when the columns are numerically
    dependent (pivot ratio of the triangular factor under ``1e-10``).
    """
    A_S = np.asarray(A_S, dtype=float)
    y = np.asarray(y, dtype=float)
    if A_S.ndim == 1:
        A_S = A_S[:, None]
    n, s = A_S.shape
    if y.shape != (n,):
        raise ValueError(f"y has shape {y.shape}, expected ({n},)")
    if s == 0:
        return np.zeros(0)
    if s > n:
        raise SingularSystemError(f"{s} columns in dimension {n} cannot be independent")
    Q, R = np.linalg.qr(A_S, mode="reduced")
    diag = np.abs(np.diag(R))
    top = diag.max()
    if top == 0.0 or diag.min() < RCOND_MIN * top:
        raise SingularSystemError(
            f"least-squares system is rank deficient (pivot ratio {diag.min() / top if top else 0.0:.3e})"
        )
    return solve_triangular(R, Q.T @ y, lower=False, check_finite=False)
