"""
Acceptance gate: one test per criterion at its stated tolerance.

Each test appends a ``PASS``/``FAIL`` line to ``REPORT``; the conftest hook
prints them in the terminal summary. Criteria 5 and 6 share one desk-scale
experiment (normal, d=50, rho=0.5, k=1000, V=200), which dominates the
runtime of the whole suite.
"""

import itertools
import math
import time

import numpy as np
import pytest

from optsub.distributions import EllipticalModel, RngStream, sample_covariates
from optsub.estimation import CoverageScenario, MseScenario, coverage_check, mse_approximation, simulate_mse
from optsub.harness import BenchConfig, ExperimentConfig, bench_complexity, run_experiment
from optsub.linalg import CovSpec, mahalanobis_all
from optsub.special import chi2_cdf, chi2_quantile, f_cdf, f_quantile
from optsub.subsamplers import (
    leverage_scores,
    select_quantile_threshold,
    select_top_k_leverage,
    select_top_k_mahalanobis,
    top_k_indices,
)
from optsub.theory import (
    optimal_design,
    optimal_threshold,
    second_moment_mc,
    second_moment_normal,
    uniform_efficiency,
    verify_optimality_sensitivity,
)

REPORT = []


def report(criterion, name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {name}: {detail}"
    REPORT.append(line)
    print(line)
    return ok


D_GRID = [1, 2, 5, 10, 50, 1000]
ALPHA_GRID = [0.001, 0.01, 0.1, 0.5]


# ---------------------------------------------------------------- 1


def test_criterion_1_threshold_exactness():
    start = time.perf_counter()
    radius = math.sqrt(chi2_quantile(0.9, 2))
    worst = 0.0
    for p, d in itertools.product([1e-6, 0.001, 0.01, 0.1, 0.5, 0.9, 0.99, 0.999], D_GRID):
        worst = max(worst, abs(chi2_cdf(chi2_quantile(p, d), d) - p))
    for p, d1, d2 in itertools.product([0.001, 0.1, 0.5, 0.9, 0.999], [1, 2, 5, 50], [3, 10, 100]):
        worst = max(worst, abs(f_cdf(f_quantile(p, d1, d2), d1, d2) - p))
    elapsed = time.perf_counter() - start
    ok = abs(radius - 2.146) <= 1e-3 and worst <= 1e-9 and elapsed < 1.0
    report(1, "threshold exactness", ok, f"sqrt(q)={radius:.6f}, max round-trip={worst:.2e}, {elapsed:.3f}s")
    assert ok


# ---------------------------------------------------------------- 2


def test_criterion_2_second_moment_oracle():
    start = time.perf_counter()
    worst_z = 0.0
    floor_ok = True
    for i, (d, alpha) in enumerate(itertools.product(D_GRID, ALPHA_GRID)):
        closed = second_moment_normal(d, alpha)
        mc, se = second_moment_mc("normal", d, alpha, mc_n=1_000_000, rng=RngStream(2024, i), return_stderr=True)
        worst_z = max(worst_z, abs(closed - mc) / se)
        floor_ok &= closed > alpha
    elapsed = time.perf_counter() - start
    ok = worst_z <= 3.0 and floor_ok and elapsed < 60.0
    report(2, "second moment vs Monte Carlo", ok, f"max |z|={worst_z:.2f}, m2>alpha={floor_ok}, {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- 3


def test_criterion_3_uniform_efficiency():
    start = time.perf_counter()
    headline = uniform_efficiency("normal", 1000, 0.01)
    bounded = monotone = True
    for alpha in ALPHA_GRID:
        effs = [uniform_efficiency("normal", d, alpha) for d in D_GRID]
        bounded &= all(alpha < e < 1.0 for e in effs)
        monotone &= all(a < b for a, b in zip(effs, effs[1:]))
    elapsed = time.perf_counter() - start
    ok = headline >= 0.89 and bounded and monotone and elapsed < 1.0
    report(3, "uniform efficiency", ok, f"eff(d=1000, 0.01)={headline:.4f}, in (alpha,1)={bounded}, monotone={monotone}")
    assert ok


# ---------------------------------------------------------------- 4


def test_criterion_4_equivalence_theorem():
    start = time.perf_counter()
    grid = [("normal", d, a, None) for d in (1, 2, 5, 10) for a in (0.01, 0.1, 0.5)]
    grid += [("t", d, a, 5.0) for d in (2, 5) for a in (0.1, 0.5)]
    passed = rejected = 0
    failures = []
    for i, (family, d, alpha, nu) in enumerate(grid):
        design = optimal_design(family, d, alpha, nu, rng=RngStream(404, i))
        if verify_optimality_sensitivity(design, mc_n=100_000, rng=RngStream(505, i)).verdict:
            passed += 1
        else:
            failures.append((family, d, alpha, "optimal"))
        for j, factor in enumerate((0.75, 1.25)):
            moved = design.with_threshold(factor * design.q_threshold, rng=RngStream(606, 2 * i + j))
            if verify_optimality_sensitivity(moved, mc_n=100_000, rng=RngStream(707, 2 * i + j)).verdict:
                failures.append((family, d, alpha, factor))
            else:
                rejected += 1
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 30.0
    report(4, "equivalence theorem", ok, f"{passed}/{len(grid)} accepted, {rejected}/{2 * len(grid)} perturbed rejected, {elapsed:.1f}s")
    assert ok, failures


# ---------------------------------------------------------------- 5 and 6

TABLE_N = [10_000, 100_000, 1_000_000]
TABLE_SMALL = {"full": 1.854e-4, "dopt": 1.380e-3, "dopt-s": 1.799e-3, "iboss": 1.693e-3, "unif": 1.899e-3}
TABLE_LARGE = {"dopt": 1.052e-3, "iboss": 1.529e-3}


@pytest.fixture(scope="module")
def desk_experiment():
    cfg = ExperimentConfig(family="normal", d=50, rho=0.5, k=1000, n_list=TABLE_N, V=200, seed=1)
    return run_experiment(cfg)


def mean_det(result, method, n, limit=None):
    return float(np.mean([r.standardized_det for r in result.records_for(method, n, limit)]))


def test_criterion_5_table_reproduction(desk_experiment):
    cells = [(m, 10_000, None, ref) for m, ref in TABLE_SMALL.items()]
    cells += [(m, 1_000_000, 100, ref) for m, ref in TABLE_LARGE.items()]
    worst = 0.0
    parts = []
    for method, n, limit, ref in cells:
        got = mean_det(desk_experiment, method, n, limit)
        rel = abs(got / ref - 1.0)
        worst = max(worst, rel)
        parts.append(f"{method}@{n:.0e}={got:.4e}({rel:+.1%})")
    ok = worst <= 0.05
    report(5, "desk-scale table", ok, ", ".join(parts))
    assert ok


def test_criterion_6_method_ordering(desk_experiment):
    ok = True
    parts = []
    for n in TABLE_N:
        det = {m: desk_experiment.det_of_mean(m, n) for m in ("full", "dopt", "iboss", "unif")}
        ok &= det["full"] < det["dopt"] <= det["iboss"] < det["unif"]
        parts.append(f"n={n:.0e}: " + " < ".join(f"{det[m]:.3e}" for m in ("full", "dopt", "iboss", "unif")))
    report(6, "FULL < D-OPT <= IBOSS < UNIF", ok, "; ".join(parts))
    assert ok


def test_criterion_6_iboss_relative_efficiency(desk_experiment):
    # Criterion 5 pins D-OPT and IBOSS to values whose ratio is 0.815 at
    # n=1e4 and 0.688 at n=1e6, so this band cannot hold alongside it.
    effs = {n: desk_experiment.det_of_mean("dopt", n) / desk_experiment.det_of_mean("iboss", n) for n in TABLE_N}
    ok = all(0.90 <= e <= 0.97 for e in effs.values())
    detail = ", ".join(f"n={n:.0e}: {e:.3f}" for n, e in effs.items())
    report(6, "IBOSS/D-OPT efficiency in [0.90, 0.97]", ok, detail)
    assert ok, detail


# ---------------------------------------------------------------- 7


def test_criterion_7_mse_consistency():
    ok = True
    parts = []
    for d in (2, 5, 10):
        sims = []
        for n in (1_000, 10_000, 100_000, 1_000_000):
            sc = MseScenario(d=d, n=n, k=1000, V=200, seed=31, response_free=True)
            sim = simulate_mse(sc).mse_per_coord
            ratio = sim / mse_approximation(sc)
            ok &= 1.0 <= ratio <= 1.2
            sims.append(sim)
            parts.append(f"d={d},n={n:.0e}:{ratio:.3f}")
        ok &= all(a > b for a, b in zip(sims, sims[1:]))
    report(7, "MSE decreasing, sim/approx in [1.0, 1.2]", ok, " ".join(parts))
    assert ok


# ---------------------------------------------------------------- 8


def test_criterion_8_coverage():
    start = time.perf_counter()
    cov = coverage_check(CoverageScenario(d=2, n=100_000, alpha=0.1, V=1000)).coverage
    elapsed = time.perf_counter() - start
    ok = 0.93 <= cov <= 0.97 and elapsed < 300.0
    report(8, "95% interval coverage", ok, f"coverage={cov:.4f}, {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- 9


def test_criterion_9_oracle_equivalences():
    gen = np.random.default_rng(909)
    checks = {}

    topk_ok = True
    for _ in range(50):
        n = int(gen.integers(1, 2000))
        k = int(gen.integers(1, n + 1))
        scores = gen.integers(0, 20, n).astype(float)
        oracle = np.sort(np.lexsort((np.arange(n), -scores))[:k])
        topk_ok &= np.array_equal(top_k_indices(scores, k), oracle)
    checks["top-k vs sort"] = topk_ok

    X = gen.standard_normal((100, 4)) @ gen.standard_normal((4, 4))
    F = np.column_stack([np.ones(100), X])
    hat = np.diag(F @ np.linalg.pinv(F))
    lev_ok = np.allclose(leverage_scores(X), hat, rtol=0, atol=1e-10)
    lev_ok &= np.array_equal(select_top_k_leverage(X, 10).indices, np.sort(np.argsort(-hat, kind="stable")[:10]))
    checks["leverage vs hat matrix"] = bool(lev_ok)

    cs_err = 0.0
    for d, rho in ((2, 0.5), (10, -0.05), (50, 0.9), (100, 0.3)):
        cov = CovSpec.compound_symmetry(d, rho)
        Z = gen.standard_normal((500, d)) * 3.0
        dense = np.full((d, d), rho) + (1.0 - rho) * np.eye(d)
        oracle = np.einsum("ij,jk,ik->i", Z, np.linalg.inv(dense), Z)
        cs_err = max(cs_err, float(np.max(np.abs(mahalanobis_all(Z, cov) - oracle) / np.maximum(1.0, oracle))))
    checks["compound symmetry vs dense inverse"] = cs_err <= 1e-10

    n, d, alpha = 1_000_000, 2, 0.1
    cov = CovSpec.identity(d)
    Xbig = sample_covariates(EllipticalModel.normal(cov), n, RngStream(99)).values
    k = int(alpha * n)
    alg1 = select_quantile_threshold(Xbig, cov, optimal_threshold("normal", d, alpha), keep_distances=False).indices
    alg2 = select_top_k_mahalanobis(Xbig, cov, k, keep_distances=False).indices
    sym = np.setxor1d(alg1, alg2).size
    checks["threshold vs top-k"] = sym <= 0.02 * k

    ok = all(checks.values())
    detail = ", ".join(f"{name}={v}" for name, v in checks.items())
    report(9, "oracle equivalences", ok, f"{detail} (CS rel err {cs_err:.1e}, sym diff {sym}/{k})")
    assert ok, checks


# ---------------------------------------------------------------- 10


def test_criterion_10_complexity_scaling():
    res = bench_complexity(BenchConfig())
    slopes_ok = all(0.8 <= s <= 1.3 for s in res.slopes.values())
    faster_ok = all(res.simplified_faster[n] for n in res.config.n_list if n >= 100_000)
    ok = slopes_ok and faster_ok
    detail = ", ".join(f"{m} slope={s:.2f}" for m, s in res.slopes.items())
    report(10, "selection time scaling", ok, f"{detail}, D-OPT-s faster at all n: {faster_ok}")
    assert ok


def test_t3_relative_efficiency_diagnostic():
    # Not a criterion: the heavy-tailed correlated panel is where the
    # published 0.951..0.928 range is reproduced; logged for the record.
    cfg = ExperimentConfig(family="t", nu=3.0, d=50, rho=0.5, k=1000, n_list=[10_000, 100_000], methods=["dopt", "iboss"], V=50, seed=3)
    res = run_experiment(cfg)
    effs = {n: res.det_of_mean("dopt", n) / res.det_of_mean("iboss", n) for n in cfg.n_list}
    REPORT.append("[INFO] t3 rho=0.5 IBOSS/D-OPT efficiency: " + ", ".join(f"n={n:.0e}: {e:.3f}" for n, e in effs.items()))
    assert all(0.5 < e <= 1.0 for e in effs.values())
