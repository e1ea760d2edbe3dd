"""Exact and Monte Carlo L_p norms of functions of i.i.d. Rademacher signs.

Ground truth for every moment claim in this package comes from three routes
that are kept deliberately independent of each other:

* ``enumerate_lp`` -- full enumeration of {-1,+1}^n (capped at n = 26);
* ``collapse_lp``  -- exact binomial weights for functions that factor
  through the coordinate sum S = sum(Z_i), usable at any n;
* ``mc_lp``        -- seeded, scheduling-independent Monte Carlo.

Also provides the two reference moment functionals for weighted Rademacher
sums (Hitczenko) and for the all-ones off-diagonal Rademacher quadratic form
(Latala).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import log, sqrt
from typing import Callable

import numpy as np
from scipy.special import gammaln

ENUMERATION_CAP = 26   # 2**26 ~ 6.7e7 evaluations keeps the oracle interactive
MC_BLOCK = 4096        # replicate block size; fixed so streams never depend on scheduling
_ENUM_CHUNK = 1 << 16
_CACHED_ARITY = 20     # sign matrices up to 2**20 x 20 (~21 MB) are worth caching
_LOG2 = log(2.0)


@dataclass(frozen=True)
class SignFunction:
    """Deterministic map {-1,+1}^n -> R, evaluated on batches of sign rows.

    ``eval`` receives an (m, arity) array with entries +-1 and must return an
    (m,) float array; it must be pure and total on the hypercube.
    """

    arity: int
    eval: Callable[[np.ndarray], np.ndarray]
    name: str = ""

    def __post_init__(self):
        if self.arity < 1:
            raise ValueError(f"arity must be >= 1, got {self.arity}")


@dataclass(frozen=True)
class MomentSpec:
    """How to compute a moment: exact enumeration, binomial collapse, or MC."""

    p: float
    method: str = "enumerate"
    reps: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.method not in ("enumerate", "collapse", "montecarlo"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "montecarlo" and self.reps < 100:
            raise ValueError(f"montecarlo requires reps >= 100, got {self.reps}")


@dataclass(frozen=True)
class MonteCarloNorm:
    """Plug-in L_p estimate with a 20-batch error summary."""

    value: float
    batch_min: float
    batch_median: float
    batch_max: float
    reps: int
    seed: int

    @property
    def spread(self) -> float:
        return self.batch_max - self.batch_min


def constant_function(arity: int, c: float, name: str = "") -> SignFunction:
    return SignFunction(arity, lambda rows: np.full(len(rows), float(c)), name or f"const({c})")


def sum_function(arity: int) -> SignFunction:
    """f(z) = sum(z_i)."""
    return SignFunction(arity, lambda rows: rows.sum(axis=1, dtype=np.float64), "sum")


def coordinate_function(arity: int, i: int) -> SignFunction:
    if not 0 <= i < arity:
        raise ValueError(f"coordinate {i} out of range for arity {arity}")
    return SignFunction(arity, lambda rows: rows[:, i].astype(np.float64), f"z[{i}]")


def weighted_sum_function(weights) -> SignFunction:
    w = np.asarray(weights, dtype=np.float64)
    return SignFunction(len(w), lambda rows: rows @ w, "weighted_sum")


@lru_cache(maxsize=4)
def _cached_sign_matrix(n: int) -> np.ndarray:
    return _sign_rows(n, 0, 1 << n)


def _sign_rows(n: int, start: int, stop: int) -> np.ndarray:
    """Rows ``start..stop`` of the lexicographic enumeration of {-1,+1}^n."""
    idx = np.arange(start, stop, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(n, dtype=np.int64)[None, :]) & 1
    return (2 * bits - 1).astype(np.int8)


def sign_matrix(n: int) -> np.ndarray:
    """All 2**n sign vectors as an (2**n, n) matrix of +-1 (n <= CAP)."""
    if n > ENUMERATION_CAP:
        raise ValueError(f"arity {n} exceeds enumeration cap {ENUMERATION_CAP}")
    if n <= _CACHED_ARITY:
        return _cached_sign_matrix(n)
    return _sign_rows(n, 0, 1 << n)


def _pairwise_sum(parts: list[float]) -> float:
    """Range-ordered pairwise reduction; result is independent of how many
    workers produced the partials, as long as their order is fixed."""
    vals = list(parts)
    if not vals:
        return 0.0
    while len(vals) > 1:
        vals = [vals[i] + vals[i + 1] if i + 1 < len(vals) else vals[i]
                for i in range(0, len(vals), 2)]
    return vals[0]


def enumerate_lp(f: SignFunction, p: float) -> float:
    """Exact (2^-n * sum_z |f(z)|^p)^(1/p) over the full hypercube."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    n = f.arity
    if n > ENUMERATION_CAP:
        raise ValueError(f"arity {n} exceeds enumeration cap {ENUMERATION_CAP}")
    total = 1 << n
    if n <= _CACHED_ARITY:
        vals = np.abs(np.asarray(f.eval(sign_matrix(n)), dtype=np.float64))
        mean = float(np.mean(vals ** p))
    else:
        parts = []
        for start in range(0, total, _ENUM_CHUNK):
            rows = _sign_rows(n, start, min(start + _ENUM_CHUNK, total))
            vals = np.abs(np.asarray(f.eval(rows), dtype=np.float64))
            parts.append(float(np.sum(vals ** p)))
        mean = _pairwise_sum(parts) / total
    return mean ** (1.0 / p)


def log_binomial_weights(n: int) -> np.ndarray:
    """log of C(n,k) * 2^-n for k = 0..n."""
    k = np.arange(n + 1, dtype=np.float64)
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1) - n * _LOG2


def collapse_lp(g: Callable[[np.ndarray], np.ndarray], n: int, p: float) -> float:
    """Exact L_p norm of g(S), S = sum of n independent signs.

    ``g`` must be defined (vectorized) on the support {-n, -n+2, ..., n}.
    Terms are evaluated in log space and accumulated in decreasing magnitude
    order, so results are bitwise stable and immune to overflow of |g|^p.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    s = 2.0 * np.arange(n + 1) - n
    vals = np.abs(np.asarray(g(s), dtype=np.float64))
    if not np.all(np.isfinite(vals)):
        raise ValueError("g produced non-finite values on the support of S")
    logw = log_binomial_weights(n)
    with np.errstate(divide="ignore"):
        terms = logw + p * np.log(vals)
    terms = terms[np.isfinite(terms)]       # zero outcomes contribute nothing
    if terms.size == 0:
        return 0.0
    terms = np.sort(terms)[::-1]
    return float(np.exp(np.logaddexp.reduce(terms) / p))


def _mc_values(f: SignFunction, reps: int, seed: int) -> np.ndarray:
    """|f| over seeded draws; block starting at replicate r uses key seed^r."""
    out = np.empty(reps, dtype=np.float64)
    for start in range(0, reps, MC_BLOCK):
        stop = min(start + MC_BLOCK, reps)
        key = np.uint64(seed) ^ np.uint64(start)
        rng = np.random.Generator(np.random.Philox(key=key))
        rows = (2 * rng.integers(0, 2, size=(stop - start, f.arity), dtype=np.int8) - 1)
        out[start:stop] = np.abs(np.asarray(f.eval(rows), dtype=np.float64))
    return out


def _batch_slices(reps: int, nbatch: int = 20) -> list[slice]:
    edges = np.linspace(0, reps, nbatch + 1).astype(int)
    return [slice(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def mc_lp(f: SignFunction, spec: MomentSpec) -> MonteCarloNorm:
    """Plug-in estimator (reps^-1 * sum |f|^p)^(1/p) over seeded i.i.d. draws.

    The error summary is the min/median/max of the 20 equal-batch estimates;
    for a converged run the batch spread brackets the enumeration value.
    """
    if spec.method != "montecarlo":
        raise ValueError(f"mc_lp requires method='montecarlo', got {spec.method!r}")
    vals = _mc_values(f, spec.reps, spec.seed)
    powers = vals ** spec.p
    estimate = float(np.mean(powers)) ** (1.0 / spec.p)
    batches = np.array([float(np.mean(powers[s])) ** (1.0 / spec.p)
                        for s in _batch_slices(spec.reps)])
    return MonteCarloNorm(
        value=estimate,
        batch_min=float(batches.min()),
        batch_median=float(np.median(batches)),
        batch_max=float(batches.max()),
        reps=spec.reps,
        seed=spec.seed,
    )


def empirical_tail(f: SignFunction, t: float, reps: int = 100_000, seed: int = 0) -> float:
    """P(|f(Z)| >= t); exact by enumeration whenever the arity permits."""
    if t < 0:
        raise ValueError(f"threshold must be >= 0, got {t}")
    if f.arity <= ENUMERATION_CAP:
        total = 1 << f.arity
        if f.arity <= _CACHED_ARITY:
            vals = np.abs(np.asarray(f.eval(sign_matrix(f.arity)), dtype=np.float64))
            return float(np.count_nonzero(vals >= t)) / total
        hits = [float(np.count_nonzero(
            np.abs(np.asarray(f.eval(_sign_rows(f.arity, a, min(a + _ENUM_CHUNK, total))),
                              dtype=np.float64)) >= t))
            for a in range(0, total, _ENUM_CHUNK)]
        return _pairwise_sum(hits) / total
    if reps < 100:
        raise ValueError(f"reps must be >= 100, got {reps}")
    vals = _mc_values(f, reps, seed)
    return float(np.count_nonzero(vals >= t)) / reps


def hitczenko_functional(a, p: float) -> float:
    """Two-sided moment equivalent for ||sum a_i eps_i||_p:

        sum_{i <= floor(p)} a_(i)  +  sqrt(p) * (sum_{i > floor(p)} a_(i)^2)^(1/2)

    with a_(1) >= a_(2) >= ... the non-increasing rearrangement. The
    equivalence constants are absolute but not explicit; the test suite
    measures them on a weight grid.
    """
    w = np.asarray(a, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty 1-d sequence")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    w = np.sort(w)[::-1]
    head = int(p)  # floor(p) largest weights
    return float(w[:head].sum() + sqrt(p) * sqrt(float((w[head:] ** 2).sum())))


def latala_allones_estimate(n: int, p: float) -> float:
    """Moment estimate p*n + p*sqrt(n) + sqrt(p)*n for the all-ones
    off-diagonal quadratic form sum_{i != j} Z_i Z_j (shape constants)."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return p * n + p * sqrt(n) + sqrt(p) * n
