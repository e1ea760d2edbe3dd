"""Simulated learners on finite-support distributions.

Everything here is exactly computable: distributions have explicitly
enumerated finite support, learners are deterministic, so risks, gaps,
leave-one-out estimates and the replace-one functions

    g_i = E_{z'_i} [ E_{(X,Y)} loss(A_{S^i}(X), Y) - loss(A_{S^i}(X_i), Y_i) ]

are finite sums, not estimates. The module checks the gap/sum-of-g sandwich
| |gap| - |sum_i g_i| | <= 2*gamma*n, the weak-correlation bound
|E g_i g_j| <= 4*gamma^2, the variance shape bound, and compares empirical
gap quantiles against every closed-form generalization bound.

Learners must be deterministic; randomized rules would break the
replace-one bookkeeping and are rejected by ``check_deterministic``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from math import sqrt
from typing import Callable

import numpy as np

from .bounds import (BoundInputs, generalization_bound, tail_from_moments,
                     variance_bound)

Predictor = Callable[[object], object]


@dataclass(frozen=True)
class Example:
    """One labelled point."""

    x: object
    y: object


Dataset = tuple  # tuple[Example, ...]; order matters (index i is replaceable)


@dataclass(frozen=True)
class FiniteDistribution:
    """Explicitly enumerated distribution over examples."""

    support: tuple
    probs: tuple

    def __post_init__(self):
        if len(self.support) != len(self.probs) or not self.support:
            raise ValueError("support and probs must be non-empty and match")
        if any(q < 0 for q in self.probs):
            raise ValueError("probabilities must be non-negative")
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {sum(self.probs)!r}, not 1")

    def sample(self, rng: np.random.Generator, n: int) -> Dataset:
        idx = rng.choice(len(self.support), size=n, p=np.asarray(self.probs))
        return tuple(self.support[int(i)] for i in idx)


@dataclass(frozen=True)
class LearnerSpec:
    """A deterministic learning rule with a bounded loss.

    ``fit`` maps a dataset to a predictor; ``loss(prediction, y)`` takes
    values in [0, loss_bound]. ``analytic_gamma``, when present, maps the
    sample size to a provable uniform-stability constant. ``replace_one``
    is an optional fast path for refitting with a single example replaced;
    it must agree with a full refit to float precision (the tests enforce
    1e-12 on the shipped rules).
    """

    name: str
    fit: Callable[[Dataset], Predictor]
    loss: Callable[[object, object], float]
    loss_bound: float
    analytic_gamma: Callable[[int], float] | None = None
    replace_one: Callable[[Dataset, Predictor, int, Example], Predictor] | None = None

    def __post_init__(self):
        if self.loss_bound < 0:
            raise ValueError(f"loss_bound must be >= 0, got {self.loss_bound}")


@dataclass(frozen=True)
class GapSample:
    """One replicate: scaled gaps and the replace-one function values."""

    gap: float
    gap_loo: float
    g_values: tuple
    seed: int


def replace(dataset: Dataset, i: int, example: Example) -> Dataset:
    return dataset[:i] + (example,) + dataset[i + 1:]


def refit(spec: LearnerSpec, dataset: Dataset, fitted: Predictor,
          i: int, example: Example) -> Predictor:
    if spec.replace_one is not None:
        return spec.replace_one(dataset, fitted, i, example)
    return spec.fit(replace(dataset, i, example))


def risk(spec: LearnerSpec, predictor: Predictor, dist: FiniteDistribution) -> float:
    """Exact E loss(h(X), Y) over the finite support."""
    loss = spec.loss
    return sum(q * loss(predictor(e.x), e.y)
               for e, q in zip(dist.support, dist.probs))


def empirical_risk(spec: LearnerSpec, predictor: Predictor, dataset: Dataset) -> float:
    loss = spec.loss
    return sum(loss(predictor(e.x), e.y) for e in dataset) / len(dataset)


def gap(spec: LearnerSpec, dataset: Dataset, dist: FiniteDistribution) -> float:
    """n * (risk - empirical risk) of the fitted predictor."""
    h = spec.fit(dataset)
    n = len(dataset)
    return n * (risk(spec, h, dist) - empirical_risk(spec, h, dataset))


def gap_loo(spec: LearnerSpec, dataset: Dataset, dist: FiniteDistribution) -> float:
    """n * (risk - leave-one-out risk); each point is scored by the
    predictor trained without it."""
    n = len(dataset)
    if n < 2:
        raise ValueError(f"leave-one-out needs n >= 2, got {n}")
    h = spec.fit(dataset)
    loo = sum(spec.loss(spec.fit(dataset[:i] + dataset[i + 1:])(e.x), e.y)
              for i, e in enumerate(dataset)) / n
    return n * (risk(spec, h, dist) - loo)


def g_i_exact(spec: LearnerSpec, dataset: Dataset, dist: FiniteDistribution, i: int) -> float:
    """Exact replace-one function value at coordinate i (both expectations
    are finite sums over the support)."""
    n = len(dataset)
    if not 0 <= i < n:
        raise IndexError(f"index {i} out of range for n={n}")
    base = spec.fit(dataset)
    xi, yi = dataset[i].x, dataset[i].y
    total = 0.0
    for example, q in zip(dist.support, dist.probs):
        h = base if example == dataset[i] else refit(spec, dataset, base, i, example)
        total += q * (risk(spec, h, dist) - spec.loss(h(xi), yi))
    return total


def g_values(spec: LearnerSpec, dataset: Dataset, dist: FiniteDistribution,
             max_refits: int = 1_000_000) -> list[float]:
    """All n replace-one values, sharing one base fit across coordinates."""
    n = len(dataset)
    work = n * len(dist.support)
    if work > max_refits:
        raise ValueError(f"support too large: {work} refits exceed cap {max_refits}")
    base = spec.fit(dataset)
    base_risk = risk(spec, base, dist)
    loss = spec.loss
    out = []
    for i, e_i in enumerate(dataset):
        xi, yi = e_i.x, e_i.y
        acc = 0.0
        for example, q in zip(dist.support, dist.probs):
            if example == e_i:
                acc += q * (base_risk - loss(base(xi), yi))
            else:
                h = refit(spec, dataset, base, i, example)
                acc += q * (risk(spec, h, dist) - loss(h(xi), yi))
        out.append(acc)
    return out


def gap_sample(spec: LearnerSpec, dist: FiniteDistribution, n: int, seed: int) -> GapSample:
    """Draw one dataset and record gap, leave-one-out gap and all g_i."""
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    ds = dist.sample(rng, n)
    return GapSample(gap=gap(spec, ds, dist),
                     gap_loo=gap_loo(spec, ds, dist),
                     g_values=tuple(g_values(spec, ds, dist)),
                     seed=seed)


@dataclass(frozen=True)
class SandwichReport:
    """| |gap| - |sum g_i| | <= 2*gamma*n, with the realized slack."""

    gap: float
    sum_g: float
    bound: float

    @property
    def slack(self) -> float:
        return abs(abs(self.gap) - abs(self.sum_g))

    @property
    def passed(self) -> bool:
        return self.slack <= self.bound + 1e-12


def sandwich_check(spec: LearnerSpec, dataset: Dataset, dist: FiniteDistribution,
                   gamma: float) -> SandwichReport:
    return SandwichReport(gap=gap(spec, dataset, dist),
                          sum_g=sum(g_values(spec, dataset, dist)),
                          bound=2.0 * gamma * len(dataset))


@dataclass(frozen=True)
class SandwichSweep:
    """Sandwich check over seeded replicates."""

    learner: str
    n: int
    reps: int
    gamma: float
    gamma_mode: str
    violations: int
    max_slack: float            # worst | |gap| - |sum g| |
    max_excess: float           # worst slack - bound (negative when all pass)

    @property
    def passed(self) -> bool:
        return self.violations == 0


def sandwich_sweep(spec: LearnerSpec, dist: FiniteDistribution, n: int,
                   reps: int, seed: int, gamma: float | None = None,
                   gamma_mode: str = "analytic") -> SandwichSweep:
    """Run the sandwich check over ``reps`` seeded datasets.

    gamma defaults to the learner's analytic constant; pass an estimated
    value (and say so in gamma_mode) only when no constant is provable.
    """
    if gamma is None:
        if spec.analytic_gamma is None:
            raise ValueError(f"{spec.name} has no analytic gamma; pass one explicitly")
        gamma = spec.analytic_gamma(n)
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    bound = 2.0 * gamma * n
    violations = 0
    max_slack = 0.0
    max_excess = -np.inf
    support = dist.support
    probs = np.asarray(dist.probs)
    loss = spec.loss
    for _ in range(reps):
        idx = rng.choice(len(support), size=n, p=probs)
        ds = tuple(support[int(j)] for j in idx)
        base = spec.fit(ds)
        base_risk = risk(spec, base, dist)
        emp = empirical_risk(spec, base, ds)
        gap_val = n * (base_risk - emp)
        sum_g = 0.0
        for i, e_i in enumerate(ds):
            xi, yi = e_i.x, e_i.y
            for example, q in zip(support, dist.probs):
                if example == e_i:
                    sum_g += q * (base_risk - loss(base(xi), yi))
                else:
                    h = refit(spec, ds, base, i, example)
                    sum_g += q * (risk(spec, h, dist) - loss(h(xi), yi))
        slack = abs(abs(gap_val) - abs(sum_g))
        max_slack = max(max_slack, slack)
        max_excess = max(max_excess, slack - bound)
        if slack > bound + 1e-12:
            violations += 1
    return SandwichSweep(learner=spec.name, n=n, reps=reps, gamma=gamma,
                         gamma_mode=gamma_mode, violations=violations,
                         max_slack=max_slack, max_excess=float(max_excess))


@dataclass(frozen=True)
class GammaEstimate:
    """Estimated uniform-stability constant.

    ``exhaustive`` mode enumerates every dataset, replacement and test point
    on the support and is exact at desk scale; ``sampled`` mode is a lower
    estimate of the true constant and must never be read as uniform.
    """

    value: float
    mode: str
    evaluations: int


def estimate_gamma(spec: LearnerSpec, dist: FiniteDistribution, n: int,
                   trials: int = 1000, seed: int = 0, mode: str = "auto",
                   exhaustive_cap: int = 2_000_000) -> GammaEstimate:
    """max over (S, i, z', (x,y)) of |loss(A_S(x),y) - loss(A_{S^i}(x),y)|."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if mode not in ("auto", "exhaustive", "sampled"):
        raise ValueError(f"unknown mode {mode!r}")
    k = len(dist.support)
    cost = (k ** n) * n * k * k if n * np.log(k) < 50 else float("inf")
    if mode == "exhaustive" or (mode == "auto" and cost <= exhaustive_cap):
        if cost > exhaustive_cap:
            raise ValueError(f"exhaustive enumeration needs {cost} evaluations, "
                             f"cap is {exhaustive_cap}")
        worst = 0.0
        count = 0
        for ds in product(dist.support, repeat=n):
            base = spec.fit(ds)
            base_losses = [spec.loss(base(e.x), e.y) for e in dist.support]
            for i in range(n):
                for repl in dist.support:
                    if repl == ds[i]:
                        continue
                    h = refit(spec, ds, base, i, repl)
                    for j, e in enumerate(dist.support):
                        worst = max(worst, abs(spec.loss(h(e.x), e.y) - base_losses[j]))
                        count += 1
        return GammaEstimate(value=worst, mode="exhaustive", evaluations=count)
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    worst = 0.0
    probs = np.asarray(dist.probs)
    for _ in range(trials):
        ds = dist.sample(rng, n)
        i = int(rng.integers(n))
        repl = dist.support[int(rng.choice(k, p=probs))]
        test = dist.support[int(rng.choice(k, p=probs))]
        base = spec.fit(ds)
        h = refit(spec, ds, base, i, repl)
        worst = max(worst, abs(spec.loss(h(test.x), test.y)
                               - spec.loss(base(test.x), test.y)))
    return GammaEstimate(value=worst, mode="sampled", evaluations=trials)


@dataclass(frozen=True)
class PairCorrelation:
    i: int
    j: int
    estimate: float
    stderr: float
    bound: float                 # 4*gamma^2 + 3*stderr

    @property
    def passed(self) -> bool:
        return abs(self.estimate) <= self.bound


@dataclass(frozen=True)
class CorrelationReport:
    """Weak-correlation and variance checks over seeded datasets."""

    learner: str
    n: int
    reps: int
    gamma: float
    pairs: tuple
    gap_variance: float
    gap_variance_stderr: float
    gap_variance_bound: float    # n^2*gamma^2 + n*L^2 (shape constants)

    @property
    def passed(self) -> bool:
        margin = 3.0 * self.gap_variance_stderr
        return (all(p.passed for p in self.pairs)
                and self.gap_variance <= self.gap_variance_bound + margin)


def correlation_check(spec: LearnerSpec, dist: FiniteDistribution, n: int,
                      reps: int, seed: int, n_pairs: int = 3,
                      gamma: float | None = None) -> CorrelationReport:
    """Estimate E[g_i*g_j] for sampled index pairs and Var(gap); assert the
    weak-correlation bound 4*gamma^2 and the variance shape bound, both with
    a 3-standard-error Monte Carlo margin."""
    if reps < 1000:
        raise ValueError(f"reps must be >= 1000, got {reps}")
    if n < 2:
        raise ValueError(f"need n >= 2 for index pairs, got {n}")
    if gamma is None:
        if spec.analytic_gamma is None:
            raise ValueError(f"{spec.name} has no analytic gamma; pass one explicitly")
        gamma = spec.analytic_gamma(n)
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    pair_count = min(n_pairs, n * (n - 1) // 2)
    pairs = set()
    while len(pairs) < pair_count:
        i, j = sorted(rng.choice(n, size=2, replace=False).tolist())
        pairs.add((int(i), int(j)))
    pairs = sorted(pairs)
    products = {pair: [] for pair in pairs}
    gaps = []
    for _ in range(reps):
        ds = dist.sample(rng, n)
        base = spec.fit(ds)
        base_risk = risk(spec, base, dist)
        gaps.append(n * (base_risk - empirical_risk(spec, base, ds)))
        for (i, j) in pairs:
            gi = _g_single(spec, ds, dist, i, base, base_risk)
            gj = _g_single(spec, ds, dist, j, base, base_risk)
            products[(i, j)].append(gi * gj)
    pair_reports = []
    for (i, j) in pairs:
        vals = np.asarray(products[(i, j)])
        est = float(vals.mean())
        se = float(vals.std(ddof=1) / sqrt(reps))
        pair_reports.append(PairCorrelation(i=i, j=j, estimate=est, stderr=se,
                                            bound=4.0 * gamma ** 2 + 3.0 * se))
    gaps = np.asarray(gaps)
    var = float(gaps.var(ddof=1))
    centered_sq = (gaps - gaps.mean()) ** 2
    var_se = float(centered_sq.std(ddof=1) / sqrt(reps))
    return CorrelationReport(
        learner=spec.name, n=n, reps=reps, gamma=gamma, pairs=tuple(pair_reports),
        gap_variance=var, gap_variance_stderr=var_se,
        gap_variance_bound=variance_bound(n, gamma, spec.loss_bound),
    )


def _g_single(spec, ds, dist, i, base, base_risk):
    e_i = ds[i]
    acc = 0.0
    for example, q in zip(dist.support, dist.probs):
        if example == e_i:
            acc += q * (base_risk - spec.loss(base(e_i.x), e_i.y))
        else:
            h = refit(spec, ds, base, i, example)
            acc += q * (risk(spec, h, dist) - spec.loss(h(e_i.x), e_i.y))
    return acc


@dataclass(frozen=True)
class QuantileRow:
    """Empirical (1-delta) quantile of |gap| next to every closed-form bound."""

    delta: float
    quantile: float
    bousquet02: float
    fv2018: float
    fv2019: float
    single_log: float
    moment_tail: float          # capped dyadic moments -> tail, + sandwich slack

    @property
    def dominated(self) -> bool:
        return self.quantile <= self.single_log


@dataclass(frozen=True)
class QuantileTable:
    learner: str
    n: int
    reps: int
    seed: int
    gamma: float
    rows: tuple

    @property
    def passed(self) -> bool:
        return all(r.dominated for r in self.rows)


def gap_quantiles(spec: LearnerSpec, dist: FiniteDistribution, n: int,
                  reps: int, deltas, seed: int,
                  gamma: float | None = None) -> QuantileTable:
    """Empirical (1-delta) quantiles of |gap| over seeded replicates, side by
    side with the four generalization bounds and the moment-derived tail.

    The moment-derived tail converts the capped dyadic moment coefficients
    (M = L, beta = 2*gamma) to a deviation bound, adds the 2*gamma*n sandwich
    slack, and is capped at the trivial n*L.
    """
    if reps < 1000:
        raise ValueError(f"reps must be >= 1000, got {reps}")
    if gamma is None:
        if spec.analytic_gamma is None:
            raise ValueError(f"{spec.name} has no analytic gamma; pass one explicitly")
        gamma = spec.analytic_gamma(n)
    gaps = collect_gaps(spec, dist, n, reps, seed)
    abs_gaps = np.abs(gaps)
    L = spec.loss_bound
    rows = []
    a_coef = 4.0 * L * sqrt(n)                                   # sqrt(p) coefficient
    b_coef = 24.0 * sqrt(2.0) * n * gamma * _ceil_log2(n)        # p coefficient
    for delta in deltas:
        inputs = BoundInputs(n=n, gamma=gamma, L=L, delta=delta)
        q = float(np.quantile(abs_gaps, 1.0 - delta, method="higher"))
        # |gap| <= |sum g_i| + 2*gamma*n and |gap| <= n*L hold pathwise
        tail = tail_from_moments(a_coef, b_coef, delta) + 2.0 * gamma * n
        rows.append(QuantileRow(
            delta=delta,
            quantile=q,
            bousquet02=generalization_bound("bousquet02", inputs).value,
            fv2018=generalization_bound("fv2018", inputs).value,
            fv2019=generalization_bound("fv2019", inputs).value,
            single_log=generalization_bound("single_log", inputs).value,
            moment_tail=min(tail, n * L),
        ))
    return QuantileTable(learner=spec.name, n=n, reps=reps, seed=seed,
                         gamma=gamma, rows=tuple(rows))


def collect_gaps(spec: LearnerSpec, dist: FiniteDistribution, n: int,
                 reps: int, seed: int) -> np.ndarray:
    """Scaled gaps over ``reps`` seeded replicates (one fit each)."""
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    support = dist.support
    probs = np.asarray(dist.probs)
    out = np.empty(reps)
    for r in range(reps):
        idx = rng.choice(len(support), size=n, p=probs)
        ds = tuple(support[int(j)] for j in idx)
        h = spec.fit(ds)
        out[r] = n * (risk(spec, h, dist) - empirical_risk(spec, h, ds))
    return out


def _ceil_log2(n: int) -> int:
    return max((n - 1).bit_length(), 1)


def check_deterministic(spec: LearnerSpec, dist: FiniteDistribution, n: int,
                        seed: int = 0) -> None:
    """Reject randomized rules: two fits of the same data must agree on the
    whole support."""
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    ds = dist.sample(rng, n)
    h1, h2 = spec.fit(ds), spec.fit(ds)
    for e in dist.support:
        if h1(e.x) != h2(e.x):
            raise ValueError(f"learner {spec.name!r} is not deterministic at x={e.x!r}")


# ---------------------------------------------------------------------------
# shipped losses, learners and distributions
# ---------------------------------------------------------------------------

def absolute_loss(prediction, y) -> float:
    return abs(prediction - y)


def zero_one_loss(prediction, y) -> float:
    return 0.0 if prediction == y else 1.0


class _ConstantPredictor:
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = value

    def __call__(self, x):
        return self.value


class _MeanPredictor:
    """Shrunk-and-clipped label mean; carries the raw mean for O(1) refits."""

    __slots__ = ("mean", "shrink")

    def __init__(self, mean: float, shrink: float):
        self.mean = mean
        self.shrink = shrink

    def __call__(self, x):
        return min(1.0, max(0.0, self.mean / self.shrink))


class _MemorizerPredictor:
    """First-occurrence label table with a default for unseen points."""

    __slots__ = ("table", "default")

    def __init__(self, table: dict, default):
        self.table = table
        self.default = default

    def __call__(self, x):
        return self.table.get(x, self.default)


def constant_learner(value: float = 0.0, loss=zero_one_loss,
                     loss_bound: float = 1.0) -> LearnerSpec:
    """Ignores the data entirely; uniformly stable with gamma = 0."""
    predictor = _ConstantPredictor(value)
    return LearnerSpec(
        name="constant",
        fit=lambda ds: predictor,
        loss=loss,
        loss_bound=loss_bound,
        analytic_gamma=lambda n: 0.0,
        replace_one=lambda ds, h, i, e: predictor,
    )


def _mean_learner(name: str, lam: float) -> LearnerSpec:
    shrink = 1.0 + lam

    def fit(ds: Dataset) -> Predictor:
        return _MeanPredictor(sum(e.y for e in ds) / len(ds), shrink)

    def replace_one(ds, h, i, e):
        return _MeanPredictor(h.mean + (e.y - ds[i].y) / len(ds), shrink)

    # labels in [0,1], absolute loss: replacing one label moves the clipped,
    # shrunk mean by at most 1/(n*(1+lam)), and the loss is 1-Lipschitz
    return LearnerSpec(
        name=name,
        fit=fit,
        loss=absolute_loss,
        loss_bound=1.0,
        analytic_gamma=lambda n: 1.0 / (n * shrink),
        replace_one=replace_one,
    )


def clipped_mean_learner() -> LearnerSpec:
    """Predicts the clipped empirical label mean; gamma = 1/n exactly."""
    return _mean_learner("clipped_mean", lam=0.0)


def shrunk_mean_learner(lam: float = 1.0) -> LearnerSpec:
    """Ridge-style shrunk mean, mean/(1+lam) clipped to [0,1];
    gamma = 1/(n*(1+lam))."""
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    return _mean_learner("shrunk_mean", lam=lam)


def memorizer_learner(default=0.0) -> LearnerSpec:
    """Recalls the label of the first training occurrence of x, else a
    default: the interpolation regime. Not stable (gamma = loss bound)."""

    def fit(ds: Dataset) -> Predictor:
        table = {e.x: e.y for e in reversed(ds)}   # first occurrence wins
        return _MemorizerPredictor(table, default)

    return LearnerSpec(
        name="memorizer",
        fit=fit,
        loss=absolute_loss,
        loss_bound=1.0,
        analytic_gamma=lambda n: 1.0,
    )


def bernoulli_labels(p: float = 0.5, x=0.0) -> FiniteDistribution:
    """Constant instance, Bernoulli(p) label."""
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    return FiniteDistribution(support=(Example(x, 0.0), Example(x, 1.0)),
                              probs=(1.0 - p, p))


def labelled_pair(p: float = 0.5) -> FiniteDistribution:
    """Two instances with deterministic labels y = x (memorizer setting)."""
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    return FiniteDistribution(support=(Example(0.0, 0.0), Example(1.0, 1.0)),
                              probs=(1.0 - p, p))


def four_point() -> FiniteDistribution:
    """Two instances times two labels with uneven probabilities."""
    return FiniteDistribution(
        support=(Example(0.0, 0.0), Example(0.0, 1.0),
                 Example(1.0, 0.0), Example(1.0, 1.0)),
        probs=(0.4, 0.1, 0.2, 0.3),
    )
