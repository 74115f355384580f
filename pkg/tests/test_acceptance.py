"""Acceptance criteria AC-1 .. AC-9 at their stated sizes and tolerances.

Each test prints one PASS/FAIL line; the terminal summary repeats them.
"""

import itertools
import math

import numpy as np
import pytest
from scipy import integrate, optimize

from nlrm.concentration import (
    fit_profile,
    get_functional,
    mean_median_gap_check,
    moment_from_tail,
    operator_norm_bound_check,
    run_mc,
)
from nlrm.experiments import REGISTRY, run_experiment
from nlrm.matrix_core import SamplerSpec, hs_norm, singular_values, symmetric_eigenvalues
from nlrm.rng import RngStream
from nlrm.spectral import TEST_FUNCTIONS, get_test_function, linear_statistic, spectral_measure_sv, w1_distance

pytestmark = pytest.mark.acceptance
SEED = 1


def _fmt(res):
    return "; ".join(f"{c.name}={c.value if c.value is None else f'{c.value:.4g}'}"
                     f"{'' if c.passed else ' (fail)'}" for c in res.checks)


def test_ac1_bias_variance(record):
    results = [run_experiment("exp_bias_variance", {"n": n, "n1": n1, "trials": 100_000}, seed=SEED)
               for n, n1 in [(100, 100), (300, 100)]]
    ok = all(r.passed for r in results)
    record("AC-1", ok, " | ".join(f"var={r.measurements['variance']:.4f} target={r.measurements['target']:.4f}"
                                  for r in results))
    assert ok


def test_ac2_beta_dependence(record):
    res = run_experiment("exp_beta_dependence", {"beta": 4, "n0": 8, "n2": 16, "trials": 100_000}, seed=SEED)
    ok = res.check("variance_vs_closed_form").passed and res.check("lower_bound").passed
    record("AC-2", ok, f"var={res.measurements['variance']:.4f} exact={res.measurements['target']:.4f} "
                       f"bound={res.measurements['bound']:.4f}")
    assert ok


def test_ac3_alpha_dependence(record):
    res = run_experiment("exp_alpha_dependence", {"n": 256, "a": [1.0, 0.25], "trials": 20_000}, seed=SEED)
    names = ["cov_target_positive", "var_times_a_vs_target[a=1]", "var_times_a_vs_target[a=0.25]",
             "var_times_a_stable"]
    ok = all(res.check(n).passed for n in names)
    record("AC-3", ok, _fmt(res))
    assert ok


def test_ac4_bottleneck(record):
    res = run_experiment("exp_bottleneck", {"n": [64, 128, 256], "trials": 10_000}, seed=SEED)
    ok = res.check("loglog_slope").passed
    record("AC-4", ok, _fmt(res))
    assert ok


def test_ac5_w1_scaling(record):
    res = run_experiment("exp_w1_scaling", {"n": [50, 100, 200, 400], "samples": 200}, seed=SEED)
    ok = res.check("loglog_slope").passed
    record("AC-5", ok, _fmt(res))
    assert ok


def test_ac6_variance_dichotomy(record):
    a4 = run_experiment("exp_variance_scaling_lss", {"regime": "A4", "f": "identity", "n": [64, 128, 256]},
                        seed=SEED)
    a1 = run_experiment("exp_variance_scaling_lss", {"regime": "A1", "f": "identity", "n": [64, 128, 256]},
                        seed=SEED)
    ok = a4.passed and a1.passed
    record("AC-6", ok, f"A4 Var max/min={a4.measurements['variance_spread']:.3f}; "
                       f"A1 Var/n max/min={a1.measurements['variance_over_n_spread']:.3f} "
                       f"(A1 Var max/min={a1.measurements['variance_spread']:.3f})")
    assert a4.passed, "A4: Var S_f not within a factor 2 across n"
    assert a1.passed, "A1: Var S_f / n not within a factor 2 across n"


def test_ac7_polynomial_trace(record):
    res = run_experiment("exp_poly_trace_variance", {"n": [32, 64, 128]}, seed=SEED)
    record("AC-7", res.passed, _fmt(res))
    assert res.passed


def _lp_w1(a, b):
    m, k = len(a), len(b)
    cost = np.abs(np.subtract.outer(a, b)).ravel()
    eq = np.vstack([np.kron(np.eye(m), np.ones(k)), np.kron(np.ones(m), np.eye(k))])
    res = optimize.linprog(cost, A_eq=eq, b_eq=np.r_[np.full(m, 1 / m), np.full(k, 1 / k)], bounds=(0, None),
                           method="highs")
    return res.fun


def test_ac8_oracle_suites(record):
    gen = RngStream(SEED).child("ac8").generator
    fails = []

    # Hoffman-Wielandt, 1000 symmetric pairs
    for _ in range(1000):
        n = int(gen.integers(2, 16))
        a = gen.standard_normal((n, n))
        b = a + gen.standard_normal((n, n)) * gen.exponential()
        a, b = a + a.T, b + b.T
        if np.linalg.norm(symmetric_eigenvalues(a) - symmetric_eigenvalues(b)) > hs_norm(a - b) * (1 + 1e-12):
            fails.append("hoffman_wielandt")
            break

    # S_f is sqrt(n)-Lipschitz in the HS norm, 1000 pairs
    names = sorted(TEST_FUNCTIONS)
    for i in range(1000):
        r, c = int(gen.integers(1, 12)), int(gen.integers(1, 12))
        a = gen.standard_normal((r, c))
        b = a + gen.standard_normal((r, c)) * gen.exponential()
        f = get_test_function(names[i % len(names)])
        d = linear_statistic(spectral_measure_sv(a), f) - linear_statistic(spectral_measure_sv(b), f)
        if abs(d) > f.lipschitz * math.sqrt(min(r, c)) * hs_norm(a - b) * (1 + 1e-12) + 1e-12:
            fails.append("lss_lipschitz")
            break

    # W1 quantile formula vs transport LP on all support sizes <= 6
    worst = 0.0
    for m, k in itertools.product(range(1, 7), repeat=2):
        a, b = gen.standard_normal(m), gen.standard_normal(k)
        worst = max(worst, abs(w1_distance(a, b) - _lp_w1(a, b)))
    if worst > 1e-10:
        fails.append(f"w1_lp({worst:.1e})")

    # tail-to-moment formula vs quadrature
    for p, r, c in [(3.5, 1.3, 0.7), (2.0, 2.0, 1.0), (1.0, 0.5, 2.0), (4.2, 2.7, 0.3)]:
        val, _ = integrate.quad(lambda t: p * t ** (p - 1) * math.exp(-c * t**r), 0, np.inf, epsabs=0, epsrel=1e-13)
        if abs(moment_from_tail(p, r, c) / val - 1) > 1e-9:
            fails.append("moment_from_tail")

    # mean-median gap <= fitted rho on Gaussian functionals
    for k, shape in enumerate([(1, 1), (4, 4), (10, 3)]):
        rep = run_mc(lambda rng, s=shape: rng.generator.standard_normal(s), get_functional("normalized_sum"), 20_000,
                     seed=SEED + k)
        rho = 1.0 / math.sqrt(fit_profile(rep).c_dom)
        if not mean_median_gap_check(rep, rho)[0]:
            fails.append("mean_median_gap")

    # operator-norm lemma
    for k, m, spec in [(200, 200, SamplerSpec("gaussian")), (100, 400, SamplerSpec("uniform", 1.0))]:
        if not operator_norm_bound_check(k, m, spec, 100, seed=SEED).passed:
            fails.append("operator_norm")

    # SVD vs symmetric eigensolver
    for shape in [(10, 10), (30, 12), (12, 30), (64, 64)]:
        mat = gen.standard_normal(shape)
        sv = singular_values(mat)
        gram = mat.T @ mat if shape[0] >= shape[1] else mat @ mat.T
        ev = symmetric_eigenvalues(gram)[: sv.size]
        if np.max(np.abs(sv**2 - ev)) > 1e-8 * max(1.0, sv[0] ** 2):
            fails.append("svd_vs_eigh")

    record("AC-8", not fails, "all oracle suites pass" if not fails else f"failed: {fails}")
    assert not fails


AC9_SMALL = {
    "exp_bias_variance": dict(trials=2000),
    "exp_alpha_dependence": dict(n=32, trials=500),
    "exp_bottleneck": dict(n=[16, 32], trials=500),
    "exp_eta_dependence": dict(n=[16, 64], n1=[16, 256], trials=500),
    "exp_beta_dependence": dict(trials=2000, trend_trials=500),
    "exp_w1_scaling": dict(n=[10, 20], samples=20),
    "exp_variance_scaling_lss": dict(n=[16, 32], trials=200),
    "exp_poly_trace_variance": dict(n=[8, 16], trials=200),
}


def test_ac9_determinism(record):
    assert set(AC9_SMALL) == set(REGISTRY)
    differ = [name for name, p in AC9_SMALL.items()
              if run_experiment(name, p, seed=SEED, workers=1).to_json()
              != run_experiment(name, p, seed=SEED, workers=3).to_json()]
    record("AC-9", not differ, "byte-identical JSON for workers 1 and 3 on every experiment" if not differ
           else f"differs: {differ}")
    assert not differ
