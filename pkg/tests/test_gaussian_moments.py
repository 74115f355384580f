import pytest
from scipy import stats

from nlrm.gaussian_moments import activation_moments, agree_to_digits, monte_carlo_moments


def test_clamp_closed_form():
    # composite trapezoid on a 5e-4 grid: O(h^2) error at the kinks
    q = activation_moments("clamp01")
    m1 = stats.norm.pdf(0) - stats.norm.pdf(1) + stats.norm.sf(1)
    m2 = stats.norm.cdf(1) - 0.5 - stats.norm.pdf(1) + stats.norm.sf(1)
    assert q.mean == pytest.approx(m1, abs=1e-7)
    assert q.second == pytest.approx(m2, abs=1e-7)
    assert q.cov > 0


def test_quadrature_agrees_with_monte_carlo():
    q = activation_moments("clamp01")
    mc = monte_carlo_moments("clamp01", draws=10**7)
    for a, b in zip(q, mc):
        assert agree_to_digits(a, b, 3)


def test_identity_moments():
    q = activation_moments("identity")
    assert q.mean == pytest.approx(0.0, abs=1e-12)
    assert q.second == pytest.approx(1.0, abs=1e-9)
    assert q.cov == pytest.approx(0.0, abs=1e-9)


def test_agreement_helper():
    assert agree_to_digits(1.0004, 1.0, 3)
    assert not agree_to_digits(1.01, 1.0, 3)
