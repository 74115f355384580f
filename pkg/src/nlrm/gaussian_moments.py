"""Gaussian moments of an activation, used as limit targets.

For g ~ N(0, 1) and sigma an activation, the pair (G1, G2) is centered
Gaussian with Var G_i = E sigma(g)^2 and Cov(G1, G2) = (E sigma(g))^2.
The target is Cov(sigma(G1), sigma(G2)).

Writing G_i = gamma + s g_i with gamma ~ N(0, c) shared and s^2 = v - c, the
covariance is Var_gamma f(gamma) with f(x) = E sigma(x + s g).  f is smooth
even when sigma has kinks, so the outer integral uses Gauss-Hermite nodes and
the inner one a fine composite trapezoid rule on a truncated g grid.
"""

from typing import NamedTuple

import numpy as np
from scipy import integrate, stats

from .network import get_activation
from .rng import RngStream

_G = np.linspace(-12.0, 12.0, 48001)
_PHI = stats.norm.pdf(_G)


class GaussianMoments(NamedTuple):
    mean: float  # E sigma(g)
    second: float  # E sigma(g)^2
    cov: float  # Cov(sigma(G1), sigma(G2))


def _smooth(sigma, x, s):
    return np.array([integrate.trapezoid(sigma(xx + s * _G) * _PHI, _G) for xx in np.atleast_1d(x)])


def activation_moments(activation, outer_nodes=120):
    sigma = get_activation(activation)
    m1 = float(integrate.trapezoid(sigma(_G) * _PHI, _G))
    m2 = float(integrate.trapezoid(sigma(_G) ** 2 * _PHI, _G))
    c = m1 * m1
    s = np.sqrt(max(m2 - c, 0.0))
    x, w = np.polynomial.hermite_e.hermegauss(outer_nodes)
    w = w / w.sum()
    f = _smooth(sigma, np.sqrt(c) * x, s)
    ef = float(np.dot(w, f))
    cov = float(np.dot(w, f * f) - ef * ef)
    return GaussianMoments(m1, m2, cov)


def monte_carlo_moments(activation, draws=10**7, seed=0, chunk=10**6):
    """Plain Monte-Carlo estimate of the same three numbers."""
    sigma = get_activation(activation)
    gen = RngStream(seed).child("gaussian_moments").generator
    s1 = s2 = 0.0
    a_sum = b_sum = ab_sum = 0.0
    done = 0
    while done < draws:
        k = min(chunk, draws - done)
        y = sigma(gen.standard_normal(k))
        s1 += y.sum()
        s2 += (y * y).sum()
        done += k
    m1, m2 = s1 / draws, s2 / draws
    c = m1 * m1
    s = np.sqrt(max(m2 - c, 0.0))
    done = 0
    while done < draws:
        k = min(chunk, draws - done)
        shared = np.sqrt(c) * gen.standard_normal(k)
        a = sigma(shared + s * gen.standard_normal(k))
        b = sigma(shared + s * gen.standard_normal(k))
        a_sum += a.sum()
        b_sum += b.sum()
        ab_sum += (a * b).sum()
        done += k
    cov = ab_sum / draws - (a_sum / draws) * (b_sum / draws)
    return GaussianMoments(float(m1), float(m2), float(cov))


def agree_to_digits(x, y, digits=3):
    """True when x and y agree to ``digits`` significant digits (relative)."""
    return abs(x - y) <= 0.5 * 10.0 ** (1 - digits) * max(abs(x), abs(y))
