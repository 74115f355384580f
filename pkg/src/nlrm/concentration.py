"""Monte-Carlo concentration engine.

``run_mc`` draws independent trials of a scalar functional of a random
matrix, each trial from its own counter-based stream, and summarizes the
sample: centers, unbiased variance and an empirical two-sided tail on a
geometric grid with Clopper-Pearson bands.  ``fit_profile`` fits one of the
tail families below to that grid.
"""

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .exceptions import ConfigurationError, ContractViolation, InsufficientDataError, NumericalError
from .matrix_core import SamplerSpec, hs_norm, operator_norm, sample, singular_values
from .rng import RngStream
from .serialization import SCHEMA_VERSION
from .spectral import get_test_function

MIN_TRIALS = 100
FLAG_FRACTION = 1e-3
GRID_POINTS = 40


# -- functionals -------------------------------------------------------------

@dataclass(frozen=True)
class Functional:
    """Real functional of a matrix with a Hilbert-Schmidt Lipschitz bound.

    ``lipschitz`` is a number or a callable of the input shape.
    """

    name: str
    fn: object = field(repr=False, compare=False)
    lipschitz: object = 1.0

    def __call__(self, m):
        return float(self.fn(np.asarray(m)))

    def bound(self, shape):
        return float(self.lipschitz(shape)) if callable(self.lipschitz) else float(self.lipschitz)


def _normalized_sum(m):
    return m.sum() / np.sqrt(m.size)


def _first_row_sum(m):
    return m[0].sum() / np.sqrt(m.shape[1])


def lss_functional(f, kind="sv"):
    """S_f over singular values (``kind="sv"``) or kernel eigenvalues (``"kernel"``).

    For 1-Lipschitz f the singular-value statistic is sqrt(min(shape))-Lipschitz.
    The kernel version S_f(Z^T Z) has no global bound.
    """
    f = get_test_function(f)
    if kind == "sv":
        return Functional(f"lss_{f.name}", lambda m: np.sum(f(singular_values(m))),
                          lambda shape: f.lipschitz * np.sqrt(min(shape)))
    if kind == "kernel":
        return Functional(f"kernel_lss_{f.name}", lambda m: np.sum(f(singular_values(m) ** 2)), np.inf)
    raise ConfigurationError(f"unknown statistic kind {kind!r}")


FUNCTIONALS = {
    f.name: f
    for f in [
        Functional("normalized_sum", _normalized_sum, 1.0),
        Functional("normalized_abs_sum", lambda m: np.abs(m).sum() / np.sqrt(m.size), 1.0),
        Functional("first_row_sum", _first_row_sum, 1.0),
        Functional("first_entry", lambda m: np.real(m.flat[0]), 1.0),
        Functional("hs_norm", hs_norm, 1.0),
        Functional("op_norm", operator_norm, 1.0),
        Functional("trace", lambda m: np.real(np.trace(m)), lambda shape: np.sqrt(shape[0])),
        Functional("normalized_trace", lambda m: np.real(np.trace(m)) / m.shape[0],
                   lambda shape: 1.0 / np.sqrt(shape[0])),
        lss_functional("identity"),
        lss_functional("tanh"),
        lss_functional("hat_1_0.5"),
        lss_functional("identity", "kernel"),
        lss_functional("min_x_1", "kernel"),
    ]
}


def get_functional(name):
    if isinstance(name, Functional):
        return name
    try:
        return FUNCTIONALS[name]
    except KeyError:
        raise ConfigurationError(f"unknown functional {name!r}; expected one of {sorted(FUNCTIONALS)}") from None


def lipschitz_spot_check(functional, base, rng, probes=20, scale=1e-3):
    """Largest |F(m + d) - F(m)| / ||d||_HS over random directions d."""
    base = np.asarray(base, dtype=np.float64)
    f0 = functional(base)
    worst = 0.0
    for k in range(probes):
        d = rng.child("probe", k).generator.standard_normal(base.shape)
        d *= scale / np.linalg.norm(d)
        worst = max(worst, abs(functional(base + d) - f0) / scale)
    return worst


# -- tail profiles -----------------------------------------------------------

PROFILE_FAMILIES = ("subgaussian", "layered", "symmetric", "polynomial")
_REQUIRED = {"subgaussian": (), "layered": ("n", "L"), "symmetric": ("n", "n0", "L"), "polynomial": ("n", "d")}


@dataclass(frozen=True)
class TailProfile:
    """min(1, prefactor * exp(-c * shape(t))) for one of the four families.

    shape(t) is
      subgaussian  t^2
      layered      min_{1<=k<=L+1} n^{(k-1)/k} t^{2/k}
      symmetric    min(n, n0) min(t^2, t^{2/(L+1)})
      polynomial   n min(t^2, t^{2/d})
    """

    family: str
    c: float = 1.0
    n: int = None
    n0: int = None
    L: int = None
    d: int = None
    prefactor: float = 2.0

    def __post_init__(self):
        if self.family not in PROFILE_FAMILIES:
            raise ConfigurationError(f"unknown profile family {self.family!r}; expected one of {PROFILE_FAMILIES}")
        missing = [k for k in _REQUIRED[self.family] if getattr(self, k) is None]
        if missing:
            raise ConfigurationError(f"profile {self.family} needs {missing}")
        if not self.c > 0:
            raise ConfigurationError(f"profile constant c must be positive, got {self.c}")

    def shape(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.family == "subgaussian":
            return t * t
        if self.family == "layered":
            ks = np.arange(1, self.L + 2)[:, None]
            flat = t.reshape(1, -1)
            return np.min(float(self.n) ** ((ks - 1) / ks) * flat ** (2.0 / ks), axis=0).reshape(t.shape)
        if self.family == "symmetric":
            return min(self.n, self.n0) * np.minimum(t * t, t ** (2.0 / (self.L + 1)))
        return self.n * np.minimum(t * t, t ** (2.0 / self.d))

    def evaluate(self, t):
        return np.minimum(1.0, self.prefactor * np.exp(-self.c * self.shape(t)))

    def to_dict(self):
        return {k: getattr(self, k) for k in ("family", "c", "n", "n0", "L", "d", "prefactor")}


def moment_from_tail(p, r, c):
    """int_0^inf p t^{p-1} exp(-c t^r) dt = p / (r c^{p/r}) Gamma(p/r).

    Combined with P(|F - m| >= t) <= C exp(-c t^r) this bounds E|F - m|^p
    by C times the returned value.
    """
    for v, name in ((p, "p"), (r, "r"), (c, "c")):
        if not v > 0:
            raise ContractViolation(f"{name} must be positive, got {v}")
    return p / (r * c ** (p / r)) * special.gamma(p / r)


# -- reports -----------------------------------------------------------------

@dataclass(frozen=True)
class TailPoint:
    t: float
    prob: float
    lower: float
    upper: float


@dataclass
class ProfileFit:
    family: str
    c_ls: float  # least-squares slope
    c_dom: float  # largest c whose profile dominates every upper band
    intercept: float
    r2: float
    t_min: float
    t_max: float
    n_points: int
    structure: dict = field(default_factory=dict)
    profile: TailProfile = None  # dominating profile, when c_dom > 0

    def predict(self, t):
        """Least-squares tail estimate; refuses t outside the fitted range."""
        if np.any(np.asarray(t) < self.t_min) or np.any(np.asarray(t) > self.t_max):
            raise ContractViolation(f"t outside the fitted range [{self.t_min:.4g}, {self.t_max:.4g}]")
        shape = TailProfile(self.family, 1.0, **self.structure).shape(t)
        return np.exp(self.intercept - self.c_ls * shape)

    def to_dict(self):
        keys = ("family", "c_ls", "c_dom", "intercept", "r2", "t_min", "t_max", "n_points", "structure")
        d = {k: getattr(self, k) for k in keys}
        d["profile"] = self.profile.to_dict() if self.profile is not None else None
        return d


@dataclass
class ConcentrationReport:
    functional: str
    trials: int
    center_mean: float
    center_median: float
    variance: float
    tail_center: str
    tail_grid: list
    flagged: int
    samples: np.ndarray = field(repr=False, default=None)
    fit: ProfileFit = None

    @property
    def std(self):
        return math.sqrt(self.variance)

    def exceedance(self, t, two_sided=True, center=None):
        """Empirical P(|F - m| >= t) (or P(F - m >= t)) from the stored samples."""
        m = self.center_median if center is None else center
        dev = self.samples - m
        dev = np.abs(dev) if two_sided else dev
        return float(np.count_nonzero(dev >= t) / self.trials)

    def to_dict(self, include_samples=False):
        d = {
            "schema_version": SCHEMA_VERSION,
            "functional": self.functional,
            "trials": self.trials,
            "center_mean": self.center_mean,
            "center_median": self.center_median,
            "variance": self.variance,
            "tail_center": self.tail_center,
            "tail_grid": [[p.t, p.prob, p.lower, p.upper] for p in self.tail_grid],
            "flagged": self.flagged,
            "fit": self.fit.to_dict() if self.fit is not None else None,
        }
        if include_samples and self.samples is not None:
            d["samples"] = [float(x) for x in self.samples]
        return d

    def to_json(self, include_samples=False):
        return json.dumps(self.to_dict(include_samples), sort_keys=True, indent=2, allow_nan=False)

    def write_tail_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "prob", "lower", "upper"])
            for p in self.tail_grid:
                w.writerow([repr(p.t), repr(p.prob), repr(p.lower), repr(p.upper)])


def clopper_pearson(k, trials, level=0.95):
    a = 1.0 - level
    lo = 0.0 if k == 0 else float(stats.beta.ppf(a / 2, k, trials - k + 1))
    hi = 1.0 if k == trials else float(stats.beta.ppf(1 - a / 2, k + 1, trials - k))
    return lo, hi


def lower_median(sorted_values):
    """Order statistic ceil(T/2) (1-based)."""
    return float(sorted_values[(sorted_values.size + 1) // 2 - 1])


def summarize(values, name="F", center="median", flagged=0):
    """Build a report from an array of finite functional values."""
    values = np.asarray(values, dtype=np.float64)
    t_count = values.size
    if t_count < 2:
        raise InsufficientDataError("need at least two finite samples")
    srt = np.sort(values)
    mean = float(srt.sum() / t_count)
    dev = srt - mean
    var = float(np.dot(dev, dev) / (t_count - 1))
    med = lower_median(srt)
    if center not in ("median", "mean"):
        raise ConfigurationError(f"tail center must be 'median' or 'mean', got {center!r}")
    m = med if center == "median" else mean
    absdev = np.sort(np.abs(srt - m))
    sd = math.sqrt(var)
    scale = sd if sd > 0 else 1.0
    grid = np.geomspace(0.1 * scale, 10.0 * scale, GRID_POINTS)
    counts = t_count - np.searchsorted(absdev, grid, side="left")  # #{|F - m| >= t}
    tail = [TailPoint(float(t), float(k / t_count), *clopper_pearson(int(k), t_count)) for t, k in zip(grid, counts)]
    return ConcentrationReport(name, t_count, mean, med, var, center, tail, int(flagged), values)


def _evaluate_trial(draw, functional, rng):
    try:
        v = functional(draw(rng))
    except NumericalError:
        return math.nan
    return v


def map_trials(fn, trials, seed, workers=1, chunk=64):
    """[fn(RngStream(seed, i)) for i in range(trials)], optionally on a thread pool.

    Each trial owns its stream and results come back in trial order, so the
    output is the same for every worker count.
    """
    trials = int(trials)

    def block(start):
        return [fn(RngStream(seed, i)) for i in range(start, min(start + chunk, trials))]

    starts = range(0, trials, chunk)
    if workers is None or workers <= 1:
        parts = [block(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            parts = list(pool.map(block, starts))
    return [v for part in parts for v in part]


def run_mc(draw, functional, trials, seed, workers=1, center="median"):
    """Monte-Carlo sample of ``functional(draw(rng_i))`` for i = 0..trials-1.

    ``draw`` receives the trial's :class:`RngStream` (``RngStream(seed, i)``)
    and returns the random matrix.  Values do not depend on ``workers``;
    results are gathered in trial order.  Trials producing non-finite values
    (or a :class:`NumericalError`) are flagged; more than 0.1% flagged aborts.
    """
    if isinstance(trials, bool) or not isinstance(trials, (int, np.integer)) or trials < MIN_TRIALS:
        raise ConfigurationError(f"trials must be an integer >= {MIN_TRIALS}, got {trials!r}")
    functional = get_functional(functional) if isinstance(functional, str) else functional
    if not isinstance(functional, Functional):
        functional = Functional(getattr(functional, "__name__", "F"), functional, np.inf)
    trials = int(trials)
    values = np.array(map_trials(lambda rng: _evaluate_trial(draw, functional, rng), trials, seed, workers, chunk=256),
                      dtype=np.float64)
    finite = np.isfinite(values)
    flagged = int(trials - finite.sum())
    if flagged > FLAG_FRACTION * trials:
        bad = np.flatnonzero(~finite)[:10].tolist()
        raise NumericalError(f"{flagged} of {trials} trials gave non-finite values", flagged=flagged, first_trials=bad)
    return summarize(values[finite], functional.name, center, flagged)


# -- fitting and lemma checks ------------------------------------------------

def fit_profile(report, family="subgaussian", **structure):
    """Fit log P(t) = b - c * shape(t) on the usable grid points.

    Usable points have empirical probability in (10/trials, 0.5); at least 5
    are needed.  The weighted least-squares c uses inverse-variance weights
    read off the Clopper-Pearson band in log space, and R^2 is weighted the
    same way.  Also returns the dominating constant
    c_dom = min_i log(prefactor / upper_i) / shape(t_i), the largest c for
    which the profile stays above every upper band.
    """
    profile = TailProfile(family, 1.0, **structure)
    pts = [p for p in report.tail_grid if 10.0 / report.trials < p.prob < 0.5]
    if len(pts) < 5:
        raise InsufficientDataError(f"only {len(pts)} usable tail points (need 5)", usable=len(pts))
    t = np.array([p.t for p in pts])
    y = np.log([p.prob for p in pts])
    up = np.array([p.upper for p in pts])
    lo = np.array([p.lower for p in pts])
    # band half-width in log space ~ z * sd(log P)
    w = 1.0 / (0.5 * np.log(up / lo)) ** 2
    x = profile.shape(t)
    A = np.column_stack([np.ones_like(x), -x])
    sw = np.sqrt(w)
    (b, c), *_ = np.linalg.lstsq(A * sw[:, None], y * sw, rcond=None)
    resid = y - A @ np.array([b, c])
    ybar = float(np.sum(w * y) / np.sum(w))
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    r2 = 1.0 - float(np.sum(w * resid**2)) / ss_tot if ss_tot > 0 else 1.0
    c_dom = float(np.min(np.log(profile.prefactor / up) / x))
    fit = ProfileFit(family, float(c), c_dom, float(b), r2, float(t.min()), float(t.max()), len(pts), dict(structure))
    if c_dom > 0:
        fit.profile = TailProfile(family, c_dom, **structure, prefactor=profile.prefactor)
    report.fit = fit
    return fit


def mean_median_gap_check(report, rho_estimate):
    gap = abs(report.center_mean - report.center_median)
    return gap <= rho_estimate, gap


def tensorization_check(component_dim, L, trials, seed=0, workers=1):
    """F = (L N)^{-1/2} * sum of all entries of L independent Gaussian blocks.

    Returns the report (with a subgaussian fit) and the fitted c.
    """
    n = int(component_dim)
    if L < 1:
        raise ContractViolation("L must be >= 1")

    def draw(rng):
        return np.vstack([rng.child("block", k).generator.standard_normal((1, n)) for k in range(L)])

    rep = run_mc(draw, FUNCTIONALS["normalized_sum"], trials, seed, workers, center="median")
    fit = fit_profile(rep, "subgaussian")
    return rep, fit.c_ls


def entrywise_rho(spec, draws=10**5, seed=0):
    """Empirical subgaussian constant of one entry: max(1/sqrt(c_dom), std)."""
    spec = spec if isinstance(spec, SamplerSpec) else SamplerSpec(spec)
    if spec.kind == "zero":
        return 0.0
    x = np.asarray(sample(spec, RngStream(seed).child("rho"), (1, draws))).ravel()
    rep = summarize(x, "entry", center="median")
    try:
        c = fit_profile(rep, "subgaussian").c_dom
    except InsufficientDataError:
        c = 0.0
    rho = 1.0 / math.sqrt(c) if c > 0 else 0.0
    return max(rho, float(np.std(x)))


@dataclass
class OperatorNormCheck:
    k: int
    m: int
    mean_norm: float
    ratio: float  # E||U||_op / (sqrt(k) + sqrt(m))
    rho_hat: float
    passed: bool


def operator_norm_bound_check(k, m, sampler, trials, seed=0, workers=1):
    """Estimate E||U||_op for a k x m matrix and compare with 8 (sqrt k + sqrt m) rho."""
    spec = sampler if isinstance(sampler, SamplerSpec) else SamplerSpec(sampler)
    if not spec.is_centered:
        raise ContractViolation("operator-norm check needs a centered sampler")

    def draw(rng):
        return sample(spec, rng, (k, m))

    rep = run_mc(draw, FUNCTIONALS["op_norm"], trials, seed, workers)
    rho = entrywise_rho(spec, seed=seed)
    ratio = rep.center_mean / (math.sqrt(k) + math.sqrt(m))
    return OperatorNormCheck(k, m, rep.center_mean, ratio, rho, ratio <= 8.0 * rho)
