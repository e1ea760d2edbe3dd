"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the report lines.
Thresholds are pinned here, not calibrated at run time; measured extremes
are printed next to every assertion so regressions are visible.
"""

import math
import time
from itertools import product

import numpy as np
import pytest
from scipy.stats import binom

from stablebounds.bounds import (dyadic_sum_moment_bound, fit_tail_coefficients,
                                 generalization_bound, second_moment_bound,
                                 tail_from_moments, variance_bound, BoundInputs)
from stablebounds.chaos import (ChaosParams, chaos_lp,
                                paley_zygmund_certificate, second_moment_exact)
from stablebounds.cli import main as cli_main
from stablebounds.lab import (bernoulli_labels, clipped_mean_learner,
                              collect_gaps, constant_learner, labelled_pair,
                              memorizer_learner, shrunk_mean_learner)
from stablebounds.oracle import SignFunction, collapse_lp, enumerate_lp
from stablebounds.partition import verify_level_bounds, verify_telescoping

M_GRID = (0.0, 0.1, 1.0, 10.0)
BETA_GRID = (0.0, 0.1, 1.0, 10.0)
N_DYADIC = tuple(2 ** j for j in range(1, 11))        # 2 .. 1024


def report(num, name, ok, detail=""):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {name}"
          + (f" -- {detail}" if detail else ""))


@pytest.fixture(scope="module")
def chaos_scan():
    """Exact chaos norms over the shared dominance grid (criteria 2, 3, 7)."""
    records = []
    for n in N_DYADIC:
        for M, beta in product(M_GRID, BETA_GRID):
            if M == 0.0 and beta == 0.0:
                continue
            params = ChaosParams(n, M, beta)
            for p in range(2, min(n, 64) + 1):
                records.append((n, p, M, beta, chaos_lp(params, p)))
    return records


def test_criterion_01_oracle_consistency():
    """enumerate_lp and collapse_lp agree to 1e-10 relative on symmetric
    functions, n <= 20, p in 1..10, in under 10 seconds."""
    families = [
        ("S", lambda n: (lambda s: s)),
        ("S^2-n", lambda n: (lambda s: s * s - n)),
        ("|S|^3", lambda n: (lambda s: np.abs(s) ** 3)),
        ("chaos11", lambda n: (lambda s: s + 0.5 * (s * s - n))),
        ("exp(S/n)", lambda n: (lambda s: np.exp(s / n))),
    ]
    t0 = time.perf_counter()
    worst = 0.0
    for n in (2, 3, 4, 6, 8, 12, 16, 20):
        for _, family in families:
            g = family(n)
            f = SignFunction(n, lambda rows, g=g: g(rows.sum(axis=1, dtype=np.float64)))
            for p in range(1, 11):
                a = enumerate_lp(f, p)
                b = collapse_lp(g, n, p)
                worst = max(worst, abs(a - b) / max(a, 1e-300))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 10.0
    report(1, "oracle consistency (enumerate vs collapse)", ok,
           f"max rel err {worst:.2e}, {elapsed:.1f}s")
    assert worst <= 1e-10
    assert elapsed < 10.0


def test_criterion_02_dyadic_bound_dominance(chaos_scan):
    """Exact chaos norm never exceeds the dyadic sum moment bound on the
    full grid; zero violations in under 60 seconds."""
    t0 = time.perf_counter()
    violations = 0
    worst_ratio = 0.0
    for n, p, M, beta, norm in chaos_scan:
        bound = dyadic_sum_moment_bound(p, n, beta, M).value
        if norm > bound:
            violations += 1
        worst_ratio = max(worst_ratio, norm / bound)
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 60.0
    report(2, "dyadic bound dominates exact chaos norms", ok,
           f"{len(chaos_scan)} grid points, max norm/bound {worst_ratio:.4f}, "
           f"{elapsed:.1f}s (+ shared scan)")
    assert violations == 0
    assert elapsed < 60.0


def test_criterion_03_lower_bound_tightness(chaos_scan):
    """For 8 <= p <= n: norm/(p*n*beta + M*sqrt(p*n)) >= 0.02, and
    bound/norm <= 50*ceil(log2 n) (both thresholds pinned pilots)."""
    min_lower = math.inf
    max_upper = 0.0
    lower_witness = upper_witness = None
    for n, p, M, beta, norm in chaos_scan:
        if not 8 <= p <= n:
            continue
        denom = p * n * beta + M * math.sqrt(p * n)
        lower = norm / denom
        if lower < min_lower:
            min_lower, lower_witness = lower, (n, p, M, beta)
        upper = dyadic_sum_moment_bound(p, n, beta, M).value / norm / _ceil_log2(n)
        if upper > max_upper:
            max_upper, upper_witness = upper, (n, p, M, beta)
    lower_ok = min_lower >= 0.02
    upper_ok = max_upper <= 50.0
    report(3, "lower-bound ratio floor (pinned pilot 0.02)", lower_ok,
           f"min ratio {min_lower:.4f} at (n,p,M,beta)={lower_witness}")
    report(3, "upper/exact within 50*ceil(log2 n)", upper_ok,
           f"max ratio/ceil(log2 n) = {max_upper:.2f} at "
           f"(n,p,M,beta)={upper_witness}")
    assert min_lower >= 0.02
    # Pinned pilot from the criterion; the measured maximum on this exact
    # grid is ~70.9 (worst at small n with p = min(n, 64)), so this
    # assertion documents the spec-level conflict rather than hiding it.
    assert max_upper <= 50.0


def _ceil_log2(n):
    return max((n - 1).bit_length(), 1)


def test_criterion_04_telescoping_and_level_bounds():
    """Telescoping identity exact to 1e-12 and every per-term/block/level
    bound holds, n <= 16, p in {2,3,4,6,8}, in under 30 seconds."""
    t0 = time.perf_counter()
    worst_dev = 0.0
    layer_violations = 0
    checks = 0
    for n in range(2, 17):
        for M, beta in ((1.0, 1.0), (0.0, 3.0), (10.0, 0.1)):
            params = ChaosParams(n, M, beta)
            worst_dev = max(worst_dev, verify_telescoping(params).max_deviation)
            for p in (2, 3, 4, 6, 8):
                rep = verify_level_bounds(params, p)
                layer_violations += (rep.terms.violations + rep.blocks.violations
                                     + rep.levels.violations)
                if not rep.passed:
                    layer_violations += 1
                checks += 1
    elapsed = time.perf_counter() - t0
    ok = worst_dev <= 1e-12 and layer_violations == 0 and elapsed < 30.0
    report(4, "telescoping identity and layer bounds", ok,
           f"max deviation {worst_dev:.2e}, {checks} layered checks, "
           f"0 violations expected, got {layer_violations}, {elapsed:.1f}s")
    assert worst_dev <= 1e-12
    assert layer_violations == 0
    assert elapsed < 30.0


def test_criterion_05_sandwich_zero_violations():
    """| |gap| - |sum g_i| | <= 2*gamma*n over 1e4 seeded datasets per
    shipped learner, n in {10, 50, 100}, in under 60 seconds."""
    from stablebounds.lab import sandwich_sweep
    t0 = time.perf_counter()
    learners = [(constant_learner(), bernoulli_labels()),
                (clipped_mean_learner(), bernoulli_labels()),
                (shrunk_mean_learner(1.0), bernoulli_labels()),
                (memorizer_learner(), labelled_pair())]
    total_violations = 0
    worst = -math.inf
    for spec, dist in learners:
        for n in (10, 50, 100):
            sweep = sandwich_sweep(spec, dist, n=n, reps=10_000,
                                   seed=hash((spec.name, n)) & 0xFFFF)
            total_violations += sweep.violations
            worst = max(worst, sweep.max_excess)
    elapsed = time.perf_counter() - t0
    ok = total_violations == 0 and elapsed < 60.0
    report(5, "gap/sum-of-g sandwich", ok,
           f"12 sweeps x 1e4 datasets, violations {total_violations}, "
           f"worst slack-bound {worst:.2e}, {elapsed:.1f}s")
    assert total_violations == 0
    assert elapsed < 60.0


def test_criterion_06_paley_zygmund_grid():
    """Certificate validity (lhs >= rhs) on the full exact grid n <= 20,
    p in 2..8, M and beta grids; zero violations."""
    violations = 0
    count = 0
    min_margin = math.inf
    for n in range(2, 21):
        for M, beta in product(M_GRID, BETA_GRID):
            if M == 0.0 and beta == 0.0:
                continue
            for p in range(2, 9):
                cert = paley_zygmund_certificate(ChaosParams(n, M, beta), p)
                count += 1
                min_margin = min(min_margin, cert.lhs - cert.rhs)
                if not cert.valid:
                    violations += 1
    ok = violations == 0
    report(6, "anti-concentration certificates", ok,
           f"{count} certificates, min lhs-rhs {min_margin:.3e}")
    assert violations == 0


def test_criterion_07_second_moment_and_variance(chaos_scan):
    """Exact chaos second moment below its closed-form bound everywhere;
    Monte Carlo gap variance below the shape bound within 3 stderr."""
    worst = 0.0
    for n in N_DYADIC:
        for M, beta in product(M_GRID, BETA_GRID):
            if M == 0.0 and beta == 0.0:
                continue
            exact = chaos_lp(ChaosParams(n, M, beta), 2)
            assert exact == pytest.approx(second_moment_exact(ChaosParams(n, M, beta)),
                                          rel=1e-10)
            bound = second_moment_bound(n, beta, M)
            worst = max(worst, exact / bound)
    # beta = 0 attains the bound with equality (both sides are M*sqrt(n)),
    # so the comparison carries a pure float-rounding epsilon
    second_ok = worst <= 1.0 + 1e-12

    learners = [(constant_learner(), bernoulli_labels(), 0.0),
                (clipped_mean_learner(), bernoulli_labels(), None),
                (shrunk_mean_learner(1.0), bernoulli_labels(), None),
                (memorizer_learner(), labelled_pair(), None)]
    var_ok = True
    details = []
    for spec, dist, gamma in learners:
        n, reps = 50, 4000
        g = spec.analytic_gamma(n) if gamma is None else gamma
        gaps = collect_gaps(spec, dist, n=n, reps=reps, seed=101)
        var = float(np.var(gaps, ddof=1))
        se = float(np.std((gaps - gaps.mean()) ** 2, ddof=1) / math.sqrt(reps))
        bound = variance_bound(n, g, spec.loss_bound)
        var_ok &= var <= bound + 3 * se
        details.append(f"{spec.name}: var {var:.3f} <= {bound:.1f}+3*{se:.3f}")
    ok = second_ok and var_ok
    report(7, "second moment and variance bounds", ok,
           f"max exact/bound {worst:.4f}; " + "; ".join(details))
    assert second_ok
    assert var_ok


def test_criterion_08_quantile_dominance():
    """Clipped-mean |gap| quantiles below the single-log bound for
    n in {50, 100, 200}, delta in {0.1, 0.01}; constant-predictor quantiles
    cross-checked against the exact binomial law."""
    from stablebounds.lab import gap_quantiles
    ok = True
    details = []
    for n in (50, 100, 200):
        table = gap_quantiles(clipped_mean_learner(), bernoulli_labels(),
                              n=n, reps=10_000, deltas=[0.1, 0.01], seed=211)
        for row in table.rows:
            ok &= row.quantile <= row.single_log
            details.append(f"n={n} d={row.delta}: {row.quantile:.2f} "
                           f"<= {row.single_log:.2f}")

    # constant predictor: |gap| = |n/2 - K| with K ~ Binomial(n, 1/2)
    n, reps, delta = 100, 10_000, 0.1
    gaps = np.abs(collect_gaps(constant_learner(0.0), bernoulli_labels(),
                               n=n, reps=reps, seed=307))
    k = np.arange(n + 1)
    pmf = binom.pmf(k, n, 0.5)
    support = np.abs(n / 2.0 - k)
    order = np.argsort(support, kind="stable")
    cdf_vals = np.cumsum(pmf[order])
    exact_q = float(support[order][np.searchsorted(cdf_vals, 1.0 - delta)])
    exact_cdf_at_q = float(pmf[support <= exact_q].sum())
    # realized gaps are nominally integers; keep the atom at the quantile
    # inside the event despite float noise like 8.000000000000002
    emp_cdf_at_q = float(np.mean(gaps <= exact_q + 1e-9))
    se = math.sqrt(exact_cdf_at_q * (1 - exact_cdf_at_q) / reps)
    binom_ok = abs(emp_cdf_at_q - exact_cdf_at_q) <= 3 * se
    emp_q = float(np.quantile(gaps, 1 - delta, method="higher"))
    bound = generalization_bound(
        "single_log", BoundInputs(n=n, gamma=0.0, L=1.0, delta=delta)).value
    binom_ok &= emp_q <= bound
    ok &= binom_ok
    report(8, "quantile dominance", ok,
           "; ".join(details) + f"; binomial check: emp cdf {emp_cdf_at_q:.4f} "
           f"vs exact {exact_cdf_at_q:.4f} (3se {3*se:.4f}), "
           f"quantile {emp_q} <= {bound:.2f}")
    assert ok


def test_criterion_09_tail_moment_equivalence():
    """Measured moment coefficients of a 1e6 standard-normal sample produce
    a tail that covers the empirical tail at delta in {0.1, 0.01, 0.001}."""
    rng = np.random.Generator(np.random.Philox(key=np.uint64(0xC0FFEE)))
    sample = rng.standard_normal(1_000_000)
    abs_sample = np.abs(sample)
    norms = {float(p): float(np.mean(abs_sample ** p) ** (1.0 / p))
             for p in range(1, 11)}
    a, b = fit_tail_coefficients(norms)
    batches = abs_sample.reshape(20, -1)
    ok = True
    details = []
    for delta in (0.1, 0.01, 0.001):
        emp = float(np.quantile(abs_sample, 1 - delta))
        spread = np.ptp([float(np.quantile(batch, 1 - delta)) for batch in batches])
        bound = tail_from_moments(a, b, delta)
        ok &= bound >= emp - 3 * spread
        details.append(f"d={delta}: bound {bound:.2f} >= emp {emp:.2f}")
    report(9, "tail/moment equivalence on a normal sample", ok,
           f"a={a:.3f} b={b:.3f}; " + "; ".join(details))
    assert ok


def test_criterion_10_byte_identical_reruns(tmp_path):
    """Stochastic runs re-executed with the same seed and different thread
    counts produce byte-identical output files."""
    learn_args = ["learn", "--learner", "constant,clipped_mean", "--n", "50",
                  "--delta", "0.1", "--reps", "2000", "--seed", "99"]
    chaos_args = ["chaos", "--n", "4,16,64", "--M", "0,1", "--beta", "1",
                  "--p", "2,8"]
    ok = True
    for label, args in (("learn", learn_args), ("chaos", chaos_args)):
        outs = []
        for threads in (1, 4):
            out = tmp_path / f"{label}_{threads}.csv"
            code = cli_main(args + ["--threads", str(threads), "--out", str(out)])
            assert code == 0
            outs.append(out.read_bytes())
        ok &= outs[0] == outs[1]
    report(10, "byte-identical stochastic reruns across thread counts", ok)
    assert ok
