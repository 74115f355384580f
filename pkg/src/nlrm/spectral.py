"""Empirical spectral measures, linear spectral statistics and 1-D W1."""

import csv
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate, optimize

from .exceptions import ContractViolation
from .matrix_core import singular_values, symmetric_eigenvalues


@dataclass(frozen=True)
class SpectralMeasure:
    """Uniform probability measure on ``atoms`` (kept non-increasing)."""

    atoms: np.ndarray
    kind: str = "eigenvalues"

    def __post_init__(self):
        atoms = np.sort(np.asarray(self.atoms, dtype=np.float64).ravel())[::-1]
        if atoms.size == 0:
            raise ContractViolation("a spectral measure needs at least one atom")
        if not np.all(np.isfinite(atoms)):
            raise ContractViolation("spectral atoms must be finite")
        if self.kind == "singular_values" and atoms[-1] < 0:
            raise ContractViolation("singular values must be non-negative")
        atoms.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)

    @property
    def weight(self):
        return 1.0 / self.atoms.size

    def __len__(self):
        return self.atoms.size

    def integrate(self, f):
        """Integral of ``f`` against the measure (the mean of f over atoms)."""
        return float(np.mean(_eval(f, self.atoms)))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "atom"])
            for i, x in enumerate(self.atoms):
                writer.writerow([i, repr(float(x))])

    @classmethod
    def from_csv(cls, path, kind="eigenvalues"):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(np.array([float(r["atom"]) for r in rows]), kind=kind)


@dataclass(frozen=True)
class TestFunction:
    """Scalar test function f with a known Lipschitz constant."""

    __test__ = False  # not a pytest class

    name: str
    fn: object = field(repr=False, compare=False)
    lipschitz: float = 1.0

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=np.float64))


def _eval(f, x):
    return np.asarray(f(x), dtype=np.float64) * np.ones_like(x)


def truncation(level):
    return TestFunction(f"min_x_{level:g}", lambda x: np.minimum(x, level), 1.0)


def hat(center, height):
    """Piecewise-linear bump max(0, height - |x - center|), 1-Lipschitz."""
    return TestFunction(f"hat_{center:g}_{height:g}", lambda x: np.maximum(0.0, height - np.abs(x - center)), 1.0)


TEST_FUNCTIONS = {
    f.name: f
    for f in [
        TestFunction("identity", lambda x: x, 1.0),
        TestFunction("abs", np.abs, 1.0),
        TestFunction("tanh", np.tanh, 1.0),
        TestFunction("zero", np.zeros_like, 0.0),
        truncation(0.5),
        truncation(1.0),
        truncation(2.0),
        hat(0.0, 1.0),
        hat(1.0, 0.5),
        hat(2.0, 1.0),
    ]
}


def get_test_function(name):
    if isinstance(name, TestFunction):
        return name
    try:
        return TEST_FUNCTIONS[name]
    except KeyError:
        raise ContractViolation(f"unknown test function {name!r}; expected one of {sorted(TEST_FUNCTIONS)}") from None


def conjugate_kernel(trace):
    """Z_L^T Z_L for a :class:`~nlrm.network.ForwardTrace` (or a matrix Z_L)."""
    z = trace.output if hasattr(trace, "output") else np.asarray(trace, dtype=np.float64)
    k = z.T @ z
    return 0.5 * (k + k.T)


def spectral_measure_sv(m, method="lapack"):
    return SpectralMeasure(singular_values(m, method=method), kind="singular_values")


def spectral_measure_sym(m):
    return SpectralMeasure(symmetric_eigenvalues(m), kind="eigenvalues")


def linear_statistic(measure, f):
    """S_f = sum_i f(atom_i); a sum, not a mean."""
    atoms = measure.atoms if isinstance(measure, SpectralMeasure) else np.asarray(measure, dtype=np.float64)
    return float(np.sum(_eval(f, atoms)))


def _atoms(m):
    if isinstance(m, SpectralMeasure):
        return m.atoms
    a = np.asarray(m, dtype=np.float64).ravel()
    if a.size == 0:
        raise ContractViolation("W1 needs non-empty measures")
    return a


def w1_distance(a, b):
    """Exact Wasserstein-1 distance between two uniform discrete measures.

    Equal sizes use the sorted (quantile) coupling; unequal sizes integrate
    |F_a - F_b| exactly over the merged breakpoints.
    """
    xa, xb = np.sort(_atoms(a)), np.sort(_atoms(b))
    if xa.size == xb.size:
        return float(np.mean(np.abs(xa - xb)))
    grid = np.concatenate([xa, xb])
    grid.sort(kind="mergesort")
    widths = np.diff(grid)
    cdf_a = np.searchsorted(xa, grid[:-1], side="right") / xa.size
    cdf_b = np.searchsorted(xb, grid[:-1], side="right") / xb.size
    return float(np.sum(np.abs(cdf_a - cdf_b) * widths))


class MeanMeasureDistances(NamedTuple):
    distances: np.ndarray
    loo_distances: np.ndarray
    mean_atoms: np.ndarray


def mean_measure(samples):
    """Quantile-wise average of equal-size measures (their W1 barycenter)."""
    stacked = _stack_sorted(samples)
    return SpectralMeasure(stacked.mean(axis=0))


def _stack_sorted(samples):
    arrays = [np.sort(_atoms(s)) for s in samples]
    sizes = {a.size for a in arrays}
    if len(sizes) != 1:
        raise ContractViolation(f"all samples need the same number of atoms, got sizes {sorted(sizes)}")
    return np.vstack(arrays)


def w1_to_mean_measure(samples):
    """W1 of each sample to the estimated mean measure.

    Returns distances to the full quantile average and leave-one-out
    distances, where sample i is compared with the average of the others.
    """
    if len(samples) < 2:
        raise ContractViolation("need at least two samples")
    stacked = _stack_sorted(samples)
    t = stacked.shape[0]
    mean = stacked.mean(axis=0)
    # quantiles shared by every sample are kept exact, so identical inputs give 0
    constant = np.ptp(stacked, axis=0) == 0
    mean[constant] = stacked[0, constant]
    dev = np.abs(stacked - mean[None, :])
    distances = dev.mean(axis=1)
    # s_i - (sum_j s_j - s_i)/(t - 1) = t (s_i - mean)/(t - 1)
    loo_distances = distances * (t / (t - 1))
    return MeanMeasureDistances(distances, loo_distances, mean[::-1].copy())


# Marchenko-Pastur law of X^T X / n_0 for X with i.i.d. unit-variance entries,
# ratio = n / n_0.

def mp_support(ratio):
    return (1.0 - np.sqrt(ratio)) ** 2, (1.0 + np.sqrt(ratio)) ** 2


def mp_density(x, ratio):
    lo, hi = mp_support(ratio)
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    inside = (x > lo) & (x < hi)
    xi = x[inside]
    out[inside] = np.sqrt((hi - xi) * (xi - lo)) / (2.0 * np.pi * ratio * xi)
    return out


def mp_cdf(x, ratio):
    lo, hi = mp_support(ratio)
    atom = max(0.0, 1.0 - 1.0 / ratio)
    if x < lo:
        return atom if x >= 0 else 0.0
    if x >= hi:
        return 1.0
    # u = sqrt(x - lo) removes the square-root edge singularity (and the
    # 1/sqrt(x) blow-up at ratio 1, where lo = 0)
    def integrand(u):
        xx = lo + u * u
        return 2.0 * u * np.sqrt(max((hi - xx) * (xx - lo), 0.0)) / (2.0 * np.pi * ratio * xx)

    if lo == 0.0:
        integrand = lambda u: np.sqrt(max(hi - u * u, 0.0)) / (np.pi * ratio)  # noqa: E731
    val, _ = integrate.quad(integrand, 0.0, np.sqrt(x - lo), limit=200, epsabs=1e-13, epsrel=1e-12)
    return atom + val


def mp_quantiles(ratio, n):
    """Mid-point quantiles F^{-1}((i - 1/2)/n), i = 1..n, non-increasing."""
    lo, hi = mp_support(ratio)
    atom = max(0.0, 1.0 - 1.0 / ratio)
    out = np.empty(n)
    for i in range(n):
        p = (i + 0.5) / n
        if p <= atom:
            out[i] = 0.0
        else:
            out[i] = optimize.brentq(lambda x: mp_cdf(x, ratio) - p, lo, hi, xtol=1e-13)
    return out[::-1]
