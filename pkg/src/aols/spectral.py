"""Spectral clustering pieces: Jacobi eigensolver, normalised Laplacian, k-means++."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import rng_for

__all__ = [
    "jacobi_eigh",
    "normalized_laplacian",
    "spectral_embedding",
    "spectral_cluster",
    "KMeansResult",
    "kmeans",
    "ISOLATED_DEGREE",
]

ISOLATED_DEGREE = 1e-12


def _round_robin(N: int):
    """Rounds of disjoint index pairs covering every pair once (circle method)."""
    M = N + (N % 2)
    players = list(range(M))
    rounds = []
    for _ in range(M - 1):
        p, q = [], []
        for i in range(M // 2):
            a, b = players[i], players[M - 1 - i]
            if a < N and b < N:
                p.append(min(a, b))
                q.append(max(a, b))
        rounds.append((np.array(p, dtype=np.intp), np.array(q, dtype=np.intp)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(S, tol: float = 1e-14, max_sweeps: int = 60):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps follow a round-robin ordering: each round annihilates ``N/2``
    disjoint off-diagonal pairs at once, so a round is a handful of
    vectorised row/column updates.  Stops when the off-diagonal Frobenius
    norm drops below ``tol * ||S||_F``.

    Returns ``(w, V)`` with ascending eigenvalues and ``S ~ V diag(w) V^T``.
    """
    A = np.array(S, dtype=float, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ValueError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    N = A.shape[0]
    V = np.eye(N)
    if N == 1:
        return np.diag(A).copy(), V
    fro = np.linalg.norm(A)
    if fro == 0.0:
        return np.zeros(N), V
    rounds = _round_robin(N)
    for _ in range(max_sweeps):
        if np.linalg.norm(A - np.diag(np.diag(A))) <= tol * fro:
            break
        for p, q in rounds:
            apq = A[p, q]
            app = A[p, p]
            aqq = A[q, q]
            live = np.abs(apq) > 1e-300
            safe = np.where(live, apq, 1.0)
            theta = (aqq - app) / (2.0 * safe)
            with np.errstate(over="ignore"):
                # huge theta: t -> 1 / (2 theta), tiny rotation
                t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t = np.where(theta == 0.0, 1.0, t)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            c = np.where(live, c, 1.0)
            s = np.where(live, s, 0.0)
            # A <- J^T A J, V <- V J for the block of disjoint rotations
            Ap, Aq = A[:, p], A[:, q]
            A[:, p], A[:, q] = c * Ap - s * Aq, s * Ap + c * Aq
            Ap, Aq = A[p, :], A[q, :]
            A[p, :], A[q, :] = c[:, None] * Ap - s[:, None] * Aq, s[:, None] * Ap + c[:, None] * Aq
            A[p, q] = 0.0
            A[q, p] = 0.0
            Vp, Vq = V[:, p], V[:, q]
            V[:, p], V[:, q] = c * Vp - s * Vq, s * Vp + c * Vq
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def normalized_laplacian(W):
    """``I - D^{-1/2} W D^{-1/2}`` and a mask of zero-degree vertices.

    Isolated vertices get degree ``ISOLATED_DEGREE`` before normalisation.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError("affinity must be square")
    if np.any(W < 0):
        raise ValueError("affinity must be nonnegative")
    deg = W.sum(axis=1)
    isolated = deg <= 0.0
    deg = np.where(isolated, ISOLATED_DEGREE, deg)
    s = 1.0 / np.sqrt(deg)
    Lsym = np.eye(W.shape[0]) - s[:, None] * W * s[None, :]
    return 0.5 * (Lsym + Lsym.T), isolated


def spectral_embedding(W, n_clusters: int):
    """Row-normalised bottom eigenvectors of the normalised Laplacian.

    Returns ``(embedding, eigenvalues, isolated)``.
    """
    Lsym, isolated = normalized_laplacian(W)
    if not 1 <= n_clusters <= Lsym.shape[0]:
        raise ValueError(f"n_clusters must be in [1, {Lsym.shape[0]}]")
    w, V = jacobi_eigh(Lsym)
    U = V[:, :n_clusters].copy()
    norms = np.linalg.norm(U, axis=1, keepdims=True)
    U = np.divide(U, norms, out=np.zeros_like(U), where=norms > 0)
    return U, w, isolated


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    history: list[float] = field(default_factory=list)  # objective per Lloyd step, best restart


def _plusplus(X, k, rng):
    N = X.shape[0]
    centers = [X[rng.integers(N)]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            # every point already coincides with a centre
            idx = rng.integers(N)
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, N - 1)
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def _sqdist(X, C):
    return np.maximum((X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :], 0.0)


def _lloyd(X, C, max_iter):
    hist = []
    for _ in range(max_iter):
        D = _sqdist(X, C)
        labels = np.argmin(D, axis=1)
        hist.append(float(D[np.arange(X.shape[0]), labels].sum()))
        newC = C.copy()
        for j in range(C.shape[0]):
            mask = labels == j
            if mask.any():
                newC[j] = X[mask].mean(axis=0)
        if np.array_equal(newC, C):
            break
        C = newC
    D = _sqdist(X, C)
    labels = np.argmin(D, axis=1)
    inertia = float(D[np.arange(X.shape[0]), labels].sum())
    hist.append(inertia)
    return labels, C, inertia, hist


def kmeans(X, k: int, seed: int = 0, restarts: int = 20, max_iter: int = 100) -> KMeansResult:
    """Lloyd's algorithm from k-means++ seeds; best of ``restarts`` runs."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2-D (points in rows)")
    if not 1 <= k <= X.shape[0]:
        raise ValueError(f"k must be in [1, {X.shape[0]}], got {k}")
    rng = rng_for(seed, "kmeans")
    best = None
    for _ in range(restarts):
        C0 = _plusplus(X, k, rng)
        labels, C, inertia, hist = _lloyd(X, C0, max_iter)
        if best is None or inertia < best.inertia:
            best = KMeansResult(labels, C, inertia, hist)
    return best


def spectral_cluster(W, n_clusters: int, seed: int = 0, restarts: int = 20, max_iter: int = 100):
    """Ng-Jordan-Weiss spectral clustering of affinity ``W``; returns labels."""
    U, _, _ = spectral_embedding(W, n_clusters)
    return kmeans(U, n_clusters, seed, restarts, max_iter).labels
