"""The adversarial lower-bound family over Rademacher signs.

The family

    g_i(z) = M*z_i + (beta/2) * z_i * sum_{j != i} z_j

satisfies every hypothesis of the dyadic sum moment bound (conditional
centering, conditional means of magnitude exactly M, bounded differences
beta), while its sum

    sum_i g_i = M*S + (beta/2)*S^2 - (beta/2)*n,      S = sum_i z_i,

is a linear-plus-quadratic Rademacher chaos whose moments grow like
p*n*beta + M*sqrt(p*n). This module certifies all of that numerically:
the hypotheses by exhaustive enumeration, the moments by exact binomial
collapse, and the anti-concentration step by a Paley-Zygmund certificate.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .oracle import (ENUMERATION_CAP, SignFunction, collapse_lp,
                     log_binomial_weights, sign_matrix)

# Matches the worst float drift of the identity sum_i g_i == closed form at
# enumeration scale; the spec-level invariant (1e-12 absolute on enumerated
# inputs) is asserted separately by the test suite.
_IDENTITY_RTOL = 1e-12


@dataclass(frozen=True)
class ChaosParams:
    """(n, M, beta) selecting one member of the lower-bound family."""

    n: int
    M: float
    beta: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        for name in ("M", "beta"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    @property
    def uniform_bound(self) -> float:
        """max_z |g_i(z)| = M + beta*(n-1)/2, attained at the all-ones vector."""
        return self.M + 0.5 * self.beta * (self.n - 1)


@dataclass(frozen=True)
class ChaosConditionsReport:
    """Worst violation, over all coordinates and all sign vectors, of each
    hypothesis of the dyadic sum moment bound."""

    conditional_centering: float    # max |E[g_i | Z_{-i}]|
    conditional_mean: float         # max | |E[g_i | Z_i]| - M |
    bounded_difference: float       # max over j != i of (|delta_j g_i| - beta)+
    uniform_bound: float            # | max |g_i| - (M + beta*(n-1)/2) |

    @property
    def worst(self) -> float:
        return max(self.conditional_centering, self.conditional_mean,
                   self.bounded_difference, self.uniform_bound)

    @property
    def passed(self) -> bool:
        return self.worst == 0.0


@dataclass(frozen=True)
class TailCertificate:
    """Exact Paley-Zygmund certificate P(|f| >= ||f||_p / 2) >= rhs with
    rhs = (||f||_p^2 / (2*||f||_{2p}^2))^p."""

    p: float
    lhs: float
    rhs: float
    norm_p: float
    norm_2p: float

    def __post_init__(self):
        if not 0 <= self.lhs <= 1:
            raise ValueError(f"lhs must be a probability, got {self.lhs}")
        if self.rhs < 0:
            raise ValueError(f"rhs must be >= 0, got {self.rhs}")

    @property
    def valid(self) -> bool:
        return self.lhs >= self.rhs


def chaos_g(i: int, z, params: ChaosParams) -> float:
    """g_i(z) = M*z_i + (beta/2)*z_i*sum_{j != i} z_j (0-based i)."""
    zz = np.asarray(z, dtype=np.float64)
    if zz.shape != (params.n,):
        raise ValueError(f"z must have shape ({params.n},), got {zz.shape}")
    if not 0 <= i < params.n:
        raise IndexError(f"index {i} out of range for n={params.n}")
    return float(params.M * zz[i] + 0.5 * params.beta * zz[i] * (zz.sum() - zz[i]))


def chaos_sum(z, params: ChaosParams) -> float:
    """sum_i g_i(z) via the closed form M*S + (beta/2)*S^2 - (beta/2)*n.

    The closed form is checked against the direct sum of the g_i on every
    call (tolerance 1e-12 relative to the family's a-priori magnitude).
    """
    zz = np.asarray(z, dtype=np.float64)
    if zz.shape != (params.n,):
        raise ValueError(f"z must have shape ({params.n},), got {zz.shape}")
    s = float(zz.sum())
    closed = params.M * s + 0.5 * params.beta * s * s - 0.5 * params.beta * params.n
    direct = sum(chaos_g(i, zz, params) for i in range(params.n))
    tol = _IDENTITY_RTOL * max(1.0, params.n * params.uniform_bound)
    if abs(direct - closed) > tol:
        raise ArithmeticError(
            f"chaos sum identity violated: direct={direct!r} closed={closed!r}")
    return closed


def chaos_sum_function(params: ChaosParams) -> SignFunction:
    """sum_i g_i as a batch sign function (closed form; identity tested separately)."""
    n, M, beta = params.n, params.M, params.beta

    def _eval(rows: np.ndarray) -> np.ndarray:
        s = rows.sum(axis=1, dtype=np.float64)
        return M * s + 0.5 * beta * (s * s - n)

    return SignFunction(n, _eval, f"chaos(n={n},M={M},beta={beta})")


def chaos_collapsed(params: ChaosParams):
    """sum_i g_i as a function of S alone, for the binomial collapse."""
    n, M, beta = params.n, params.M, params.beta
    return lambda s: M * s + 0.5 * beta * (s * s - n)


def chaos_lp(params: ChaosParams, p: float) -> float:
    """Exact ||sum_i g_i||_p at any n (the sum factors through S)."""
    return collapse_lp(chaos_collapsed(params), params.n, p)


def second_moment_exact(params: ChaosParams) -> float:
    """Closed form ||sum_i g_i||_2 = sqrt(M^2*n + (beta^2/2)*n*(n-1))."""
    n = params.n
    return sqrt(params.M ** 2 * n + 0.5 * params.beta ** 2 * n * (n - 1))


def verify_chaos_conditions(params: ChaosParams) -> ChaosConditionsReport:
    """Check all four hypotheses by exhaustive enumeration of {-1,+1}^n.

    For every coordinate i the check enumerates the 2^(n-1) assignments of
    the remaining coordinates and both values of z_i; all four violations
    are exactly 0 for this family.
    """
    n, M, beta = params.n, params.M, params.beta
    if n > ENUMERATION_CAP:
        raise ValueError(f"n={n} exceeds enumeration cap {ENUMERATION_CAP}")
    worst_center = 0.0
    worst_mean = 0.0
    worst_bdiff = 0.0
    worst_unif = 0.0
    expected_max = params.uniform_bound
    if n == 1:
        # no other coordinates: g_0 = M*z_0
        worst_mean = abs(M - M)
        worst_unif = abs(M - expected_max)
        return ChaosConditionsReport(0.0, worst_mean, 0.0, worst_unif)
    others = sign_matrix(n - 1)                      # assignments of Z_{-i}
    t = others.sum(axis=1, dtype=np.float64)         # sum over j != i
    for i in range(n):
        # g_i depends on z_i and the coordinates j != i; enumerating `others`
        # enumerates exactly the conditioning of coordinate i.
        max_abs_g = 0.0
        branches = {}
        for zi in (1.0, -1.0):
            g_branch = zi * M + 0.5 * beta * zi * t
            branches[zi] = g_branch
            worst_mean = max(worst_mean, abs(abs(float(np.mean(g_branch))) - M))
            max_abs_g = max(max_abs_g, float(np.max(np.abs(g_branch))))
            # flip each j != i and re-evaluate g_i from its definition
            for j in range(n - 1):
                g_flip = zi * M + 0.5 * beta * zi * (t - 2.0 * others[:, j])
                diff = float(np.max(np.abs(g_branch - g_flip)))
                worst_bdiff = max(worst_bdiff, max(diff - beta, 0.0))
        # centering given Z_{-i}: average the two z_i branches pointwise
        center = 0.5 * (branches[1.0] + branches[-1.0])
        worst_center = max(worst_center, float(np.max(np.abs(center))))
        worst_unif = max(worst_unif, abs(max_abs_g - expected_max))
    return ChaosConditionsReport(worst_center, worst_mean, worst_bdiff, worst_unif)


def lower_ratio(params: ChaosParams, p: float) -> float:
    """Exact norm divided by its conjectured growth rate:

        ||sum g_i||_p / (p*n*beta + M*sqrt(p*n)),       2 <= p <= n.

    The absolute constant in front of the rate is not explicit; the test
    suite pins a measured floor (0.02 for p >= 8) as a regression threshold.
    """
    if not 2 <= p <= params.n:
        raise ValueError(f"lower_ratio requires 2 <= p <= n, got p={p}, n={params.n}")
    if params.M == 0 and params.beta == 0:
        raise ValueError("degenerate family (M = beta = 0) has no lower bound to test")
    denom = p * params.n * params.beta + params.M * sqrt(p * params.n)
    return chaos_lp(params, p) / denom


def tail_probability(params: ChaosParams, t: float) -> float:
    """Exact P(|sum_i g_i| >= t) via binomial weights (any n)."""
    if t < 0:
        raise ValueError(f"threshold must be >= 0, got {t}")
    n = params.n
    s = 2.0 * np.arange(n + 1) - n
    vals = np.abs(np.asarray(chaos_collapsed(params)(s), dtype=np.float64))
    w = np.exp(log_binomial_weights(n))
    return float(w[vals >= t].sum() / w.sum())


def paley_zygmund_certificate(params: ChaosParams, p: float) -> TailCertificate:
    """Exact anti-concentration certificate for f = sum_i g_i:

        lhs = P(|f| >= ||f||_p / 2)
        rhs = (||f||_p^2 / (2*||f||_{2p}^2))^p

    Validity (lhs >= rhs) is the Paley-Zygmund inequality; both sides are
    computed exactly through the binomial collapse, so the certificate
    scales far beyond enumeration range.
    """
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    norm_p = chaos_lp(params, p)
    norm_2p = chaos_lp(params, 2 * p)
    lhs = tail_probability(params, 0.5 * norm_p)
    if norm_2p == 0.0:
        rhs = 0.0
    else:
        rhs = (norm_p ** 2 / (2.0 * norm_2p ** 2)) ** p
    return TailCertificate(p=p, lhs=lhs, rhs=rhs, norm_p=norm_p, norm_2p=norm_2p)
