import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize
from scipy.stats import wasserstein_distance

from nlrm.exceptions import ContractViolation
from nlrm.matrix_core import hs_norm
from nlrm.network import NetworkConfig, forward, sample_network
from nlrm.rng import RngStream
from nlrm.spectral import (
    TEST_FUNCTIONS,
    SpectralMeasure,
    conjugate_kernel,
    get_test_function,
    linear_statistic,
    mean_measure,
    mp_cdf,
    mp_density,
    mp_quantiles,
    mp_support,
    spectral_measure_sv,
    spectral_measure_sym,
    w1_distance,
    w1_to_mean_measure,
)

atoms = st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=12)


def lp_w1(a, b):
    """Transport LP between uniform measures, solved by HiGHS."""
    m, k = len(a), len(b)
    cost = np.abs(np.subtract.outer(a, b)).ravel()
    rows = []
    for i in range(m):
        r = np.zeros((m, k))
        r[i] = 1
        rows.append(r.ravel())
    for j in range(k):
        r = np.zeros((m, k))
        r[:, j] = 1
        rows.append(r.ravel())
    rhs = np.r_[np.full(m, 1 / m), np.full(k, 1 / k)]
    res = optimize.linprog(cost, A_eq=np.array(rows), b_eq=rhs, bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def test_w1_matches_lp_on_small_supports():
    gen = RngStream(0).generator
    for m, k in itertools.product(range(1, 7), repeat=2):
        for _ in range(3):
            a, b = gen.standard_normal(m), gen.standard_normal(k) + gen.normal()
            assert abs(w1_distance(a, b) - lp_w1(a, b)) <= 1e-10


def test_w1_matches_scipy():
    gen = RngStream(1).generator
    for m, k in [(5, 5), (7, 11), (100, 37)]:
        a, b = gen.standard_normal(m), gen.exponential(size=k)
        assert w1_distance(a, b) == pytest.approx(wasserstein_distance(a, b), abs=1e-12)


def test_w1_examples():
    assert w1_distance([0.0], [1.0]) == 1.0
    assert w1_distance([0.0, 1.0], [0.0, 1.0]) == 0.0
    assert w1_distance([1.0, 2.0, 3.0], [2.0]) == pytest.approx(2 / 3)
    with pytest.raises(ContractViolation):
        w1_distance([], [1.0])


@settings(max_examples=200, deadline=None)
@given(atoms, atoms, atoms)
def test_w1_metric_axioms(a, b, c):
    ab, ba = w1_distance(a, b), w1_distance(b, a)
    assert ab >= 0 and ab == pytest.approx(ba, abs=1e-9)
    assert ab <= w1_distance(a, c) + w1_distance(c, b) + 1e-9
    assert w1_distance(a, a) == 0.0


@settings(max_examples=100, deadline=None)
@given(atoms, atoms, st.sampled_from(sorted(TEST_FUNCTIONS)))
def test_kantorovich_duality_bound(a, b, name):
    # |int f dmu - int f dnu| <= Lip(f) W1, with equality for the CDF-sign witness below
    f = get_test_function(name)
    gap = abs(SpectralMeasure(a).integrate(f) - SpectralMeasure(b).integrate(f))
    assert gap <= f.lipschitz * w1_distance(a, b) + 1e-9


def test_duality_attained_for_ordered_measures():
    # when b stochastically dominates a, f(x) = x attains W1
    a, b = np.array([0.0, 1.0, 2.0]), np.array([0.5, 1.5, 4.0])
    f = get_test_function("identity")
    assert SpectralMeasure(b).integrate(f) - SpectralMeasure(a).integrate(f) == pytest.approx(w1_distance(a, b))


def test_lss_is_sqrt_n_lipschitz_1000_pairs():
    gen = RngStream(2).generator
    names = sorted(TEST_FUNCTIONS)
    for i in range(1000):
        r, c = int(gen.integers(1, 10)), int(gen.integers(1, 10))
        a = gen.standard_normal((r, c))
        b = a + gen.standard_normal((r, c)) * gen.exponential()
        f = get_test_function(names[i % len(names)])
        da = linear_statistic(spectral_measure_sv(a), f) - linear_statistic(spectral_measure_sv(b), f)
        assert abs(da) <= f.lipschitz * np.sqrt(min(r, c)) * hs_norm(a - b) * (1 + 1e-12) + 1e-12


def test_measure_basics(tmp_path):
    m = SpectralMeasure([1.0, 3.0, 2.0])
    assert list(m.atoms) == [3.0, 2.0, 1.0] and m.weight == pytest.approx(1 / 3)
    assert not m.atoms.flags.writeable
    m.to_csv(tmp_path / "m.csv")
    assert np.array_equal(SpectralMeasure.from_csv(tmp_path / "m.csv").atoms, m.atoms)
    with pytest.raises(ContractViolation):
        SpectralMeasure([])
    with pytest.raises(ContractViolation):
        SpectralMeasure([-1.0], kind="singular_values")
    with pytest.raises(ContractViolation):
        get_test_function("cosh")


def test_linear_statistic_is_a_sum():
    a = np.diag([1.0, 2.0, 5.0])
    assert linear_statistic(spectral_measure_sym(a), get_test_function("identity")) == pytest.approx(np.trace(a))
    assert linear_statistic(spectral_measure_sym(a), get_test_function("zero")) == 0.0
    assert linear_statistic([0.5, 3.0], get_test_function("min_x_1")) == 1.5


def test_conjugate_kernel_is_gram():
    cfg = NetworkConfig(n=6, widths=(4, 5), activations="tanh")
    trace = forward(sample_network(cfg, RngStream(3)), cfg)
    k = conjugate_kernel(trace)
    assert k.shape == (6, 6) and np.array_equal(k, k.T)
    assert np.allclose(k, trace.output.T @ trace.output, atol=1e-14)
    assert spectral_measure_sym(k).atoms[-1] > -1e-12


def test_mean_measure_and_loo_against_brute_force():
    gen = RngStream(4).generator
    samples = [gen.standard_normal(5) for _ in range(6)]
    res = w1_to_mean_measure(samples)
    mean = mean_measure(samples)
    assert np.allclose(np.sort(res.mean_atoms)[::-1], mean.atoms)
    for i, s in enumerate(samples):
        assert res.distances[i] == pytest.approx(w1_distance(s, mean.atoms), abs=1e-12)
        others = mean_measure([t for j, t in enumerate(samples) if j != i])
        assert res.loo_distances[i] == pytest.approx(w1_distance(s, others.atoms), abs=1e-12)
    identical = w1_to_mean_measure([samples[0]] * 4)
    assert not identical.distances.any() and not identical.loo_distances.any()
    with pytest.raises(ContractViolation):
        w1_to_mean_measure([samples[0]])
    with pytest.raises(ContractViolation):
        w1_to_mean_measure([np.zeros(3), np.zeros(4)])


@pytest.mark.parametrize("ratio", [0.25, 1.0, 2.0])
def test_mp_law(ratio):
    lo, hi = mp_support(ratio)
    mass, _ = integrate.quad(lambda x: mp_density(np.array([x]), ratio)[0], lo, hi, limit=200)
    atom = max(0.0, 1 - 1 / ratio)
    assert mass + atom == pytest.approx(1.0, abs=1e-6)
    assert mp_cdf(hi, ratio) == 1.0 and mp_cdf(-1.0, ratio) == 0.0
    assert mp_cdf(0.5 * (lo + hi), ratio) == pytest.approx(
        atom + integrate.quad(lambda x: mp_density(np.array([x]), ratio)[0], lo, 0.5 * (lo + hi))[0], abs=1e-6)
    q = mp_quantiles(ratio, 400)
    assert np.all(np.diff(q) <= 0)
    assert q.mean() == pytest.approx(1.0, abs=5e-3)


def test_data_kernel_matches_mp():
    # L = 0 kernel X^T X / n_0 with n = n_0 = 400
    n = 400
    cfg = NetworkConfig(n=n, widths=(n,))
    k = conjugate_kernel(forward(sample_network(cfg, RngStream(5)), cfg))
    assert w1_distance(spectral_measure_sym(k), mp_quantiles(1.0, n)) <= 0.1
