"""Nested dyadic partitions and the telescoping decomposition they induce.

The index set is padded to the next power of two ``2**k`` (the extra indices
carry identically-zero functions). Level l consists of ``2**(k-l)``
contiguous blocks of size ``2**l``: level 0 is singletons, level k the full
set, and each block is the disjoint union of two blocks one level down.

Conditioning g_i on Z_i and everything outside its level-l block defines
g_i^l; the differences g_i^l - g_i^{l+1} telescope:

    g_i - E[g_i | Z_i] = sum_{l < k} (g_i^l - g_i^{l+1}).

For the chaos family the conditional expectations have closed forms

    g_i^l = M*z_i + (beta/2)*z_i*sum_{j not in B^l(i)} z_j,
    g_i^l - g_i^{l+1} = (beta/2)*z_i*sum_{j in B^{l+1}(i) \\ B^l(i)} z_j,

and every step of the decomposition is checkable by exact enumeration:
per-term norms against 2*sqrt(p*2^l)*beta, block sums against
6*sqrt(2)*p*2^l*beta, level sums against 6*sqrt(2)*p*2^k*beta, and the
assembled chain against the dyadic sum moment bound. A slow generic
conditional-expectation path (nested enumeration) is kept alongside the
closed form as an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .bounds import dyadic_sum_moment_bound
from .chaos import ChaosParams
from .oracle import ENUMERATION_CAP, SignFunction, sign_matrix

_SQRT2 = sqrt(2.0)
GENERIC_CAP = 12   # nested enumeration blows up past desk scale


@dataclass(frozen=True)
class PartitionTree:
    """Dyadic partition scheme over indices 0..n_padded-1."""

    n_original: int
    n_padded: int
    k: int                      # n_padded == 2**k

    def __post_init__(self):
        if self.n_original < 1:
            raise ValueError(f"n must be >= 1, got {self.n_original}")
        if self.n_padded != 1 << self.k:
            raise ValueError("n_padded must equal 2**k")
        if not self.n_original <= self.n_padded < 2 * self.n_original:
            raise ValueError("padding must be the next power of two")

    @property
    def levels(self) -> list[list[range]]:
        """All partitions, level 0 (singletons) through level k (full set)."""
        return [self.blocks(l) for l in range(self.k + 1)]

    def blocks(self, l: int) -> list[range]:
        if not 0 <= l <= self.k:
            raise ValueError(f"level {l} out of range 0..{self.k}")
        size = 1 << l
        return [range(a, a + size) for a in range(0, self.n_padded, size)]


def build_partition(n: int) -> PartitionTree:
    """Pad n to the next power of two and build the dyadic scheme."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    k = (n - 1).bit_length()
    return PartitionTree(n_original=n, n_padded=1 << k, k=k)


def block_of(tree: PartitionTree, i: int, l: int) -> range:
    """B^l(i): the unique level-l block containing index i (O(1))."""
    if not 0 <= i < tree.n_padded:
        raise IndexError(f"index {i} out of range 0..{tree.n_padded - 1}")
    if not 0 <= l <= tree.k:
        raise ValueError(f"level {l} out of range 0..{tree.k}")
    start = (i >> l) << l
    return range(start, start + (1 << l))


def sibling_block(tree: PartitionTree, i: int, l: int) -> range:
    """B^{l+1}(i) \\ B^l(i): the level-l block merged with i's at level l+1."""
    if not 0 <= l < tree.k:
        raise ValueError(f"level {l} out of range 0..{tree.k - 1}")
    sib = ((i >> l) ^ 1) << l
    return range(sib, sib + (1 << l))


def conditioned_chaos(tree: PartitionTree, i: int, l: int, z, params: ChaosParams) -> float:
    """g_i^l(z) for the chaos family (closed-form conditional expectation)."""
    zz = _check_z(tree, z, params)
    if i >= params.n:
        return 0.0                      # padded index: function is identically 0
    block = block_of(tree, i, l)
    outside = float(zz.sum()) - float(zz[block.start:min(block.stop, params.n)].sum())
    return float(params.M * zz[i] + 0.5 * params.beta * zz[i] * outside)


def telescope_term_chaos(tree: PartitionTree, i: int, l: int, z, params: ChaosParams) -> float:
    """g_i^l - g_i^{l+1} = (beta/2)*z_i*sum over the sibling block (closed form)."""
    zz = _check_z(tree, z, params)
    if not 0 <= l < tree.k:
        raise ValueError(f"level {l} out of range 0..{tree.k - 1}")
    if i >= params.n:
        return 0.0
    sib = sibling_block(tree, i, l)
    inner = float(zz[sib.start:min(sib.stop, params.n)].sum())
    return float(0.5 * params.beta * zz[i] * inner)


def telescope_term_generic(f: SignFunction, tree: PartitionTree, i: int, l: int, z) -> float:
    """g_i^l - g_i^{l+1} for an arbitrary sign function, via nested
    enumeration of the conditioned coordinates (slow reference path,
    n <= GENERIC_CAP)."""
    if f.arity > GENERIC_CAP:
        raise ValueError(f"generic path capped at n <= {GENERIC_CAP}, got {f.arity}")
    if not 0 <= l < tree.k:
        raise ValueError(f"level {l} out of range 0..{tree.k - 1}")
    return (_conditional_mean_generic(f, tree, i, l, z)
            - _conditional_mean_generic(f, tree, i, l + 1, z))


def _conditional_mean_generic(f: SignFunction, tree: PartitionTree, i: int, l: int, z) -> float:
    """E[f | Z_i, Z outside B^l(i)], averaging over the in-block coordinates."""
    zz = np.asarray(z, dtype=np.int8)
    if zz.shape != (f.arity,):
        raise ValueError(f"z must have shape ({f.arity},), got {zz.shape}")
    block = block_of(tree, i, l)
    coords = [j for j in block if j != i and j < f.arity]
    if not coords:
        return float(np.asarray(f.eval(zz[None, :]), dtype=np.float64)[0])
    fill = sign_matrix(len(coords))
    rows = np.repeat(zz[None, :], len(fill), axis=0)
    rows[:, coords] = fill
    return float(np.mean(np.asarray(f.eval(rows), dtype=np.float64)))


@dataclass(frozen=True)
class TelescopeReport:
    """Worst deviation of sum_l (g_i^l - g_i^{l+1}) from g_i - M*z_i over the
    full enumeration and all real indices."""

    n: int
    max_deviation: float

    def passed(self, tol: float = 1e-12) -> bool:
        return self.max_deviation <= tol


def _block_sums(tree: PartitionTree, rows: np.ndarray) -> list[np.ndarray]:
    """Per-level coordinate sums over every block, padded coords as zero.

    Returns, for each level l, an array of shape (2**(k-l), m) whose b-th row
    is sum of z_j over block b (restricted to real coordinates).
    """
    m, n = rows.shape
    level0 = np.zeros((tree.n_padded, m), dtype=np.float64)
    level0[:n] = rows.T
    sums = [level0]
    for _ in range(tree.k):
        prev = sums[-1]
        sums.append(prev[0::2] + prev[1::2])
    return sums


def verify_telescoping(params: ChaosParams) -> TelescopeReport:
    """Check the telescoping identity on every sign vector and index."""
    n = params.n
    if n > ENUMERATION_CAP:
        raise ValueError(f"n={n} exceeds enumeration cap {ENUMERATION_CAP}")
    tree = build_partition(n)
    rows = sign_matrix(n).astype(np.float64)
    total = rows.sum(axis=1)
    sums = _block_sums(tree, rows)
    worst = 0.0
    for i in range(n):
        zi = rows[:, i]
        g_i = params.M * zi + 0.5 * params.beta * zi * (total - zi)
        acc = np.zeros(len(rows))
        for l in range(tree.k):
            acc += 0.5 * params.beta * zi * sums[l][(i >> l) ^ 1]
        dev = float(np.max(np.abs(acc - (g_i - params.M * zi))))
        worst = max(worst, dev)
    return TelescopeReport(n=n, max_deviation=worst)


@dataclass(frozen=True)
class LayerCheck:
    """One layer of the decomposition: worst slack of bound - exact norm."""

    label: str
    count: int
    min_slack: float
    violations: int


@dataclass(frozen=True)
class LevelBoundsReport:
    """Exact norms of every term, block sum and level sum against their
    stated bounds, plus the assembled chain up to the dyadic sum bound."""

    n: int
    p: float
    terms: LayerCheck
    blocks: LayerCheck
    levels: LayerCheck
    sum_norm: float               # exact ||sum_i g_i||_p
    chain_value: float            # M*||S||_p + sum of exact level norms
    chain_bound: float            # 4*M*sqrt(p*n) + sum of level bounds
    final_bound: float            # dyadic sum moment bound

    @property
    def passed(self) -> bool:
        return (self.terms.violations == 0 and self.blocks.violations == 0
                and self.levels.violations == 0
                and self.sum_norm <= self.chain_value <= self.chain_bound <= self.final_bound)


def verify_level_bounds(params: ChaosParams, p: float) -> LevelBoundsReport:
    """Exact-norm check of every bound used by the telescoping argument."""
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    n = params.n
    if n > ENUMERATION_CAP:
        raise ValueError(f"n={n} exceeds enumeration cap {ENUMERATION_CAP}")
    tree = build_partition(n)
    rows = sign_matrix(n).astype(np.float64)
    total = rows.sum(axis=1)
    sums = _block_sums(tree, rows)
    beta = params.beta

    def lp(values: np.ndarray) -> float:
        return float(np.mean(np.abs(values) ** p) ** (1.0 / p))

    term_slacks = []
    block_slacks = []
    level_slacks = []
    level_norms = []
    for l in range(tree.k):
        term_bound = 2.0 * sqrt(p * (1 << l)) * beta
        block_bound = 6.0 * _SQRT2 * p * (1 << l) * beta
        level_bound = 6.0 * _SQRT2 * p * tree.n_padded * beta
        level_values = np.zeros(len(rows))
        for b, block in enumerate(tree.blocks(l)):
            sib = sums[l][b ^ 1]
            block_values = np.zeros(len(rows))
            for i in block:
                if i >= n:
                    continue
                term = 0.5 * beta * rows[:, i] * sib
                term_slacks.append(term_bound - lp(term))
                block_values += term
            block_slacks.append(block_bound - lp(block_values))
            level_values += block_values
        level_norms.append(lp(level_values))
        level_slacks.append(level_bound - level_norms[-1])

    g_sum = params.M * total + 0.5 * beta * (total * total - n)
    sum_norm = lp(g_sum)
    chain_value = params.M * lp(total) + float(np.sum(level_norms))
    chain_bound = (4.0 * params.M * sqrt(p * n)
                   + 6.0 * _SQRT2 * p * tree.n_padded * beta * tree.k)
    final = dyadic_sum_moment_bound(p, n, beta, params.M).value

    def layer(label: str, slacks: list[float]) -> LayerCheck:
        if not slacks:
            return LayerCheck(label, 0, 0.0, 0)
        arr = np.asarray(slacks)
        return LayerCheck(label, len(slacks), float(arr.min()),
                          int(np.count_nonzero(arr < 0)))

    return LevelBoundsReport(
        n=n, p=p,
        terms=layer("term", term_slacks),
        blocks=layer("block", block_slacks),
        levels=layer("level", level_slacks),
        sum_norm=sum_norm,
        chain_value=chain_value,
        chain_bound=chain_bound,
        final_bound=final,
    )


def _check_z(tree: PartitionTree, z, params: ChaosParams) -> np.ndarray:
    if params.n != tree.n_original:
        raise ValueError(f"tree was built for n={tree.n_original}, params have n={params.n}")
    zz = np.asarray(z, dtype=np.float64)
    if zz.shape != (params.n,):
        raise ValueError(f"z must have shape ({params.n},), got {zz.shape}")
    return zz
