"""Closed-form success-probability bounds for OLS/AOLS on Gaussian dictionaries.

The recovery guarantee has the shape ``Pr{success} >= p1 * p2 * p3``, valid for
every ``0 < eps < 1`` and ``0 < delta < 1``.  Each factor is evaluated in a
numerically safe way (log space where powers or exponentials can overflow)
and clamped to ``[0, 1]`` since a negative lower bound says nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "c0",
    "c1",
    "BoundParams",
    "BoundValue",
    "noiseless_bound",
    "noisy_bound",
    "best_bound",
    "SampleComplexity",
    "sample_complexity",
    "grid_constants",
    "exponent_c1",
    "snr_requirement",
    "eps_delta_grid",
]

_LOG_MAX = 709.0  # exp() overflows just above this


def _open_unit(name, v):
    if not 0.0 < v < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {v}")


def c0(eps):
    """``eps^2/4 - eps^3/6``; accepts scalars or arrays."""
    e = np.asarray(eps, dtype=float)
    if np.any((e <= 0) | (e >= 1)):
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    out = e * e / 4.0 - e**3 / 6.0
    return float(out) if out.ndim == 0 else out


def c1(eps):
    """``sqrt((1 - eps) / (1 + eps))``."""
    e = np.asarray(eps, dtype=float)
    if np.any((e <= 0) | (e >= 1)):
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    out = np.sqrt((1.0 - e) / (1.0 + e))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BoundParams:
    n: int
    m: int
    k: int
    L: int = 1
    eps: float = 0.5
    delta: float = 0.5
    t: float | None = None

    def __post_init__(self):
        for name in ("n", "m", "k", "L"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        _open_unit("eps", self.eps)
        _open_unit("delta", self.delta)
        if self.k + self.L - 1 >= self.m:
            raise ValueError(f"need k + L - 1 < m, got k={self.k}, L={self.L}, m={self.m}")
        if self.t is not None and not self.t > 0:
            raise ValueError(f"t must be positive, got {self.t}")


@dataclass(frozen=True)
class BoundValue:
    p1: float
    p2: float
    p3: float
    product: float
    raw_p2: float
    eps: float
    delta: float

    def as_dict(self) -> dict:
        return {
            "p1": self.p1,
            "p2": self.p2,
            "p3": self.p3,
            "product": self.product,
            "raw_p2": self.raw_p2,
            "eps": self.eps,
            "delta": self.delta,
        }


def _clamp(v):
    return np.clip(v, 0.0, 1.0)


def _p1(n, k, eps):
    inner = 1.0 - 2.0 * np.exp(-(n - k + 1) * c0(eps))
    return _clamp(inner) ** 2


def _p2_raw(n, k, delta):
    # 1 - 2 (12/delta)^k exp(-n c0(delta/2)), with the product formed as one exponent
    log_term = math.log(2.0) + k * np.log(12.0 / np.asarray(delta)) - n * c0(np.asarray(delta) / 2.0)
    return 1.0 - np.exp(np.minimum(log_term, _LOG_MAX))


def _p3_from_exponents(expo, power):
    # (1 - sum_i exp(-expo_i))^power, expo summed over the last axis
    s = np.exp(-expo).sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        p3 = np.where(s < 1.0, np.exp(power * np.log1p(-np.minimum(s, 1.0))), 0.0)
    return _clamp(p3)


def _noiseless_exponents(n, k, eps, delta):
    i = np.arange(k)
    e = np.asarray(eps, dtype=float)[..., None]
    d = np.asarray(delta, dtype=float)[..., None]
    return n / (k - i) * ((1.0 - e) / (1.0 + e)) * (1.0 - d) ** 2


def _noisy_exponents(n, k, eps, delta, t):
    i = np.arange(k)
    e = np.asarray(eps, dtype=float)[..., None]
    d = np.asarray(delta, dtype=float)[..., None]
    return n * ((1.0 - e) / (1.0 + e)) * (1.0 - d) ** 4 / (k * (1.0 / ((k - i) * t * t) + (1.0 + d) ** 2))


def _value(p1, raw_p2, p3, eps, delta) -> BoundValue:
    p1, p3 = float(p1), float(p3)
    raw_p2 = float(raw_p2)
    p2 = float(_clamp(raw_p2))
    return BoundValue(p1, p2, p3, p1 * p2 * p3, raw_p2, float(eps), float(delta))


def noiseless_bound(p: BoundParams) -> BoundValue:
    """Lower bound on exact recovery from ``y = A x`` in at most ``k`` iterations."""
    power = p.m - p.k - p.L + 1
    p3 = _p3_from_exponents(_noiseless_exponents(p.n, p.k, p.eps, p.delta), power)
    return _value(_p1(p.n, p.k, p.eps), _p2_raw(p.n, p.k, p.delta), p3, p.eps, p.delta)


def noisy_bound(p: BoundParams) -> BoundValue:
    """Bound for ``y = A x + nu`` with ``||nu|| <= eps_nu`` and ``min |x_j| >= (1 + delta + t) eps_nu``."""
    if p.t is None:
        raise ValueError("noisy_bound needs the margin parameter t")
    power = p.m - p.k - p.L + 1
    p3 = _p3_from_exponents(_noisy_exponents(p.n, p.k, p.eps, p.delta, p.t), power)
    return _value(_p1(p.n, p.k, p.eps), _p2_raw(p.n, p.k, p.delta), p3, p.eps, p.delta)


def eps_delta_grid(step: float = 0.01) -> np.ndarray:
    """Grid ``step, 2 step, ...`` strictly inside (0, 1)."""
    if not 0.0 < step < 0.5:
        raise ValueError(f"grid step must lie in (0, 0.5), got {step}")
    count = int(round(1.0 / step))
    g = np.arange(1, count) / count
    return g[(g > 0) & (g < 1)]


def best_bound(n: int, m: int, k: int, L: int = 1, noisy: bool = False, t: float | None = None,
               step: float = 0.01) -> BoundValue:
    """Maximise the bound product over an (eps, delta) grid.

    The whole grid is evaluated at once; ties go to the smallest eps, then the
    smallest delta.
    """
    BoundParams(n, m, k, L, 0.5, 0.5, t)  # validation only
    if noisy and t is None:
        raise ValueError("noisy bound needs t")
    g = eps_delta_grid(step)
    E, D = np.meshgrid(g, g, indexing="ij")
    p1 = _p1(n, k, g)[:, None]
    raw_p2 = _p2_raw(n, k, g)[None, :]
    if noisy:
        expo = _noisy_exponents(n, k, E, D, t)
    else:
        expo = _noiseless_exponents(n, k, E, D)
    p3 = _p3_from_exponents(expo, m - k - L + 1)
    prod = p1 * _clamp(raw_p2) * p3
    flat = int(np.argmax(prod))  # first maximum in row-major order
    a, b = divmod(flat, g.size)
    return _value(p1[a, 0], raw_p2[0, b], p3[a, b], g[a], g[b])


def grid_constants(step: float = 0.01) -> tuple[float, float]:
    """``(C2, C3)`` as the max / min of their defining sets over the clipped grid.

    Over the open square both extrema degenerate (``log(12/delta)`` grows
    without bound, ``c0`` tends to 0), so the grid bounds them.
    """
    g = eps_delta_grid(step)
    C2 = float(max(np.log(12.0 / g).max(), c0(g).max()))
    C3 = float(min(c0(g / 2.0).min(), c0(g).min()))
    return C2, C3


def exponent_c1(eps: float, delta: float, t: float | None = None) -> float:
    """Exponent constant ``C1``; the noisy form applies when ``t`` is given."""
    _open_unit("eps", eps)
    _open_unit("delta", delta)
    base = (1.0 - eps) / (1.0 + eps)
    if t is None:
        return base * (1.0 - delta) ** 2
    return base * (1.0 - delta) ** 4 / (1.0 + t * t * (1.0 + delta) ** 2)


@dataclass(frozen=True)
class SampleComplexity:
    n: int
    first: float | None  # None when the log branch is undefined
    second: float
    log_branch_dropped: bool
    outside_regime: bool  # m <= (k + L - 1)^{3/2}, where the derivation does not apply


def sample_complexity(m: int, k: int, L: int = 1, beta: float = 0.05**0.5, C1: float = 1.0,
                      C2: float | None = None, C3: float | None = None) -> SampleComplexity:
    """Measurements sufficient for success probability above ``1 - beta^2``.

    ``n >= max{(6/C1) k log(m / ((k+L-1) beta^{1/3})), (C2 k + log(8/beta^2)) / C3}``.
    C2 and C3 default to the grid extrema of :func:`grid_constants`.
    """
    _open_unit("beta", beta)
    if C2 is None or C3 is None:
        g2, g3 = grid_constants()
        C2 = g2 if C2 is None else C2
        C3 = g3 if C3 is None else C3
    for name, v in (("C1", C1), ("C2", C2), ("C3", C3)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    if k < 1 or L < 1 or m < 1:
        raise ValueError("m, k and L must be >= 1")
    kl = k + L - 1
    second = (C2 * k + math.log(8.0 / beta**2)) / C3
    dropped = m <= kl
    first = None
    if not dropped:
        first = (6.0 / C1) * k * math.log(m / (kl * beta ** (1.0 / 3.0)))
    best = second if first is None else max(first, second)
    return SampleComplexity(int(math.ceil(best)), first, second, dropped, m <= kl**1.5)


def snr_requirement(k: int, delta: float, t: float) -> float:
    """Approximate SNR ``k (1 + delta + t)^2`` implied by the minimum-magnitude condition."""
    return float(k) * (1.0 + delta + t) ** 2
