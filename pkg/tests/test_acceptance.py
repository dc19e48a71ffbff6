"""Acceptance criteria, one test each (5 and 6 are split into their two clauses).

Every test records a one-line verdict that ``conftest.py`` prints at the end of
the run. Tolerances below are the declared ones; the metrics are recomputed
here from the raw per-seed records.
"""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from precaug.augmentation import FixedGaussianGDA
from precaug.augmented import DilationFactors, phi_functionals
from precaug.errors import InvalidRegime, SingularM
from precaug.rng import RngStream
from precaug.shrinkage import bisect_b_star, indicator_eta, solve_b_star, suggest_eta
from precaug.suites import (
    augmented_suite,
    det_equiv_suite,
    moments_suite,
    sherman_morrison_suite,
    shrinkage_suite,
)

VERDICTS: dict[str, str] = {}


def record(key, ok, detail):
    line = f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}"
    VERDICTS[key] = line
    print(line)
    assert ok, line


def within_one(i, j):
    return i is not None and j is not None and abs(i - j) <= 1


def test_criterion_1_fixed_point_exactness():
    gen = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        d = int(gen.integers(2, 60))
        n = int(gen.integers(d + 1, 5 * d))
        a = gen.standard_normal((d, d))
        sigma = a @ a.T / d + 0.05 * np.eye(d)
        worst = max(worst, abs(solve_b_star(sigma, n, 0.0).value - 1.0 / (1.0 - d / n)))
    elapsed = time.perf_counter() - t0
    record("1", worst <= 1e-10 and elapsed < 1.0, f"max err {worst:.2e} (<= 1e-10), {elapsed:.2f}s (< 1s)")


def test_criterion_2_closed_form_fixed_point():
    t0 = time.perf_counter()
    b = solve_b_star(np.eye(100), 200, 0.5).value
    elapsed = time.perf_counter() - t0
    oracle = bisect_b_star(np.eye(100), 200, 0.5).value
    err = abs(b - math.sqrt(2))
    ok = err <= 1e-10 and abs(oracle - math.sqrt(2)) <= 1e-10 and elapsed < 0.1
    record("2", ok, f"|b* - sqrt 2| = {err:.2e}, bisection {abs(oracle - math.sqrt(2)):.2e}, {elapsed:.3f}s (< 0.1s)")


def test_criterion_3_sherman_morrison():
    t0 = time.perf_counter()
    rep = sherman_morrison_suite(seed=3)[0]
    elapsed = time.perf_counter() - t0
    assert len(rep.records) == 100 and max(r["d"] for r in rep.records) <= 64
    worst = max(r["frobenius"] for r in rep.records)
    record("3", worst <= 1e-10 and elapsed < 5, f"max Frobenius gap {worst:.2e} (<= 1e-10), {elapsed:.1f}s (< 5s)")


def test_criterion_4_moment_decompositions():
    t0 = time.perf_counter()
    rep = moments_suite(seed=4)[0]
    elapsed = time.perf_counter() - t0
    kinds = {r["scheme"] for r in rep.records}
    assert kinds == {"fixed_gaussian_gda", "gaussian_mixture_gda", "fixed_gaussian_tda", "random_mask_tda",
                     "salt_pepper_tda"}
    assert rep.config["m_mc"] == 200_000 and rep.config["d"] <= 20 and rep.config["seeds"] == 20
    worst = max(r["gap"] for r in rep.records)
    record("4", worst < 0.05 and elapsed < 60, f"max gap {worst:.4f} (< 0.05), {elapsed:.1f}s (< 60s)")


@pytest.fixture(scope="module")
def shrinkage_run():
    t0 = time.perf_counter()
    rep = shrinkage_suite(seed=5)[0]
    return rep, time.perf_counter() - t0


def test_criterion_5a_error_estimate_deviation(shrinkage_run):
    rep, elapsed = shrinkage_run
    per_point = np.mean([r["rel_dev"] for r in rep.records], axis=0)
    worst = float(per_point.max())
    where = float(np.logspace(-3, 0, 25)[int(per_point.argmax())])
    record("5a", worst < 0.1 and elapsed < 120,
           f"max over grid of mean |E_hat - E|/E = {worst:.3f} at lambda={where:.3g} (< 0.1), {elapsed:.1f}s")


def test_criterion_5b_lambda_argmin(shrinkage_run):
    rep, elapsed = shrinkage_run
    agree = sum(within_one(r["argmin_estimate"], r["argmin_oracle"]) for r in rep.records)
    record("5b", agree >= 18 and elapsed < 120, f"argmin within one step in {agree}/20 seeds (>= 18)")


@pytest.fixture(scope="module")
def augmented_run():
    t0 = time.perf_counter()
    rep = augmented_suite(seed=6)[0]
    return rep, time.perf_counter() - t0


def test_criterion_6a_augmented_deviation(augmented_run):
    rep, elapsed = augmented_run
    rel = np.array([r["rel_dev"] for r in rep.records])
    mean = float(rel.mean())
    record("6a", mean < 0.15 and elapsed < 300,
           f"mean |E_hat - E|/E over seeds and alpha grid = {mean:.3f} (< 0.15), {elapsed:.1f}s (< 300s)")


def test_criterion_6b_alpha_argmin(augmented_run):
    rep, elapsed = augmented_run
    agree = sum(within_one(r["argmin_estimate"], r["argmin_oracle"]) for r in rep.records)
    record("6b", agree >= 16 and elapsed < 300, f"argmin within one step in {agree}/20 seeds (>= 16)")


def test_criterion_7_det_equiv_convergence():
    t0 = time.perf_counter()
    reports = det_equiv_suite(seed=7)
    elapsed = time.perf_counter() - t0
    parts, ok = [], True
    for rep in reports:
        assert [r["n"] for r in rep.records] == [200, 400, 800]
        assert all(r["d"] == r["n"] // 4 for r in rep.records)
        bias = [r["bias"] for r in rep.records]
        ratios = [bias[i + 1] / bias[i] for i in range(2)]
        ok &= all(q <= 0.6 for q in ratios)
        parts.append(f"{rep.name}: " + ", ".join(f"{q:.2f}" for q in ratios))
    ok &= elapsed < 600
    record("7", ok, "; ".join(parts) + f" (each <= 0.6), {elapsed:.1f}s")


def test_criterion_8_degenerate_guards():
    t0 = time.perf_counter()
    gen = np.random.default_rng(8)
    indicator_hits = 0
    for d, n in ((5, 5), (6, 5), (40, 12), (3, 1)):
        x = gen.standard_normal((d, n))
        indicator_hits += sum(indicator_eta(x, eta) for eta in (1e-300, 1e-9, 1e-3, 1.0, 1e9))
    x = gen.standard_normal((4, 30))
    singular = np.diag([1.0, 0.0, 0.0, 1.0])
    dil = DilationFactors(1.0, 1.0, 1, 0.0, 0.0)
    with pytest.raises(SingularM):
        phi_functionals(x, FixedGaussianGDA(singular), 10, 0.0, dil, eta=1e-6)
    rejected = 0
    for d in (10, 11, 50):
        with pytest.raises(InvalidRegime):
            suggest_eta(1.0, 10, d)
        rejected += 1
    elapsed = time.perf_counter() - t0
    ok = indicator_hits == 0 and rejected == 3 and elapsed < 1
    record("8", ok, f"indicator true {indicator_hits}x for d >= n, SingularM raised, suggest_eta rejected "
                    f"{rejected}/3, {elapsed:.2f}s (< 1s)")


def _cli(args, threads, cwd):
    env = dict(os.environ, PRECAUG_THREADS=str(threads))
    proc = subprocess.run([sys.executable, "-m", "precaug.cli", *args], cwd=cwd, env=env,
                          capture_output=True, text=True)
    return proc.returncode, proc.stdout


def test_criterion_9_thread_reproducibility(tmp_path):
    t0 = time.perf_counter()
    data = tmp_path / "x.bin"
    code, _ = _cli(["gen", "sigma.kind=ar1", "sigma.r=0.5", "sigma.d=20", "n=120", "seed=9", f"output={data}"],
                   1, tmp_path)
    assert code == 0
    scheme = ["scheme.kind=fixed_gaussian_tda", "scheme.cov=0.25"]
    runs = {
        "gen": ["gen", "sigma.kind=spiked", "sigma.d=15", "sigma.spikes=5,3", "n=60", "seed=1", "output=g.bin"],
        "estimate": ["estimate", f"data={data}", "lambda=0.2", *scheme, "m=60", "output=r.bin"],
        "augment": ["augment", f"data={data}", "scheme.kind=random_mask_tda", "scheme.keep_prob=0.6", "m=50",
                    "output=a.bin"],
        "lambda-curve": ["lambda-curve", f"data={data}", "lambda_grid=logspace(-3,0,9)", "mode=oracle",
                         "sigma.kind=ar1", "sigma.r=0.5"],
        "alpha-curve": ["alpha-curve", f"data={data}", *scheme, "lambda=0.1", "alpha_grid=linspace(0,0.8,5)",
                        "k_mc=16", "loo=all"],
        "tune": ["tune", f"data={data}", *scheme, "lambda=0.1", "alpha_grid=0,0.3,0.6", "k_mc=8"],
        "validate sherman-morrison": ["validate", "--suite", "sherman-morrison"],
        "validate moments": ["validate", "--suite", "moments", "replicates=2"],
        "validate shrinkage": ["validate", "--suite", "shrinkage"],
        "validate augmented": ["validate", "--suite", "augmented", "replicates=2"],
        "validate det-equiv": ["validate", "--suite", "det-equiv", "replicates=16"],
    }
    mismatched = []
    for name, template in runs.items():
        outputs = []
        for t in (1, 4, 8):
            work = tmp_path / f"{name.replace(' ', '_')}-{t}"
            work.mkdir()
            _, stdout = _cli(template, t, work)
            outputs.append((stdout, [(p.name, p.read_bytes()) for p in sorted(work.iterdir())]))
        if not (outputs[0] == outputs[1] == outputs[2]) or not (outputs[0][0] or outputs[0][1]):
            mismatched.append(name)
    elapsed = time.perf_counter() - t0
    ok = not mismatched and elapsed < 120
    record("9", ok, f"{len(runs) - len(mismatched)}/{len(runs)} runs bit-identical at 1/4/8 threads, "
                    f"{elapsed:.1f}s (< 120s)" + (f"; differing: {mismatched}" if mismatched else ""))
