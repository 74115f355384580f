"""Non-commutative polynomials in random matrices.

A term of degree k is

    A^(0) x_{i_1}^{e_1} A^(1) x_{i_2}^{e_2} ... x_{i_k}^{e_k} A^(k),

with e_j in {1, *} (``*`` = conjugate transpose) and coefficient matrices of
operator norm at most 1.  A coefficient is stored as ``None`` (identity), a
complex scalar c with |c| <= 1 (c * identity) or an explicit n x n matrix.
Polynomials are evaluated at ``n^{-1/2} X`` in complex arithmetic.
"""

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from ._validation import check_matrix
from .exceptions import ConfigurationError, ContractViolation
from .matrix_core import operator_norm, symmetric_eigenvalues
from .spectral import get_test_function

NORM_TOL = 1e-10
MATCH_TOL = 1e-12


def _normalize_coefficient(c, n):
    if c is None:
        return None
    if np.isscalar(c):
        c = complex(c)
        if abs(c) > 1 + NORM_TOL:
            raise ConfigurationError(f"scalar coefficient {c} has modulus > 1")
        return None if c == 1 else c
    a = check_matrix(c, name="coefficient", error=ConfigurationError).astype(np.complex128)
    if n is not None and a.shape != (n, n):
        raise ConfigurationError(f"coefficient has shape {a.shape}, expected {(n, n)}")
    if a.shape[0] != a.shape[1]:
        raise ConfigurationError(f"coefficient must be square, got {a.shape}")
    norm = operator_norm(a)
    if norm > 1 + NORM_TOL:
        raise ConfigurationError(f"coefficient has operator norm {norm:.6g} > 1")
    if np.allclose(a, np.eye(a.shape[0]), rtol=0, atol=MATCH_TOL):
        return None
    return a


def _coef_adjoint(c):
    if c is None:
        return None
    if isinstance(c, complex):
        return c.conjugate()
    return c.conj().T


def _coef_equal(a, b):
    if a is None or isinstance(a, complex):
        a_s = 1.0 if a is None else a
        if b is None or isinstance(b, complex):
            return abs(a_s - (1.0 if b is None else b)) <= MATCH_TOL
        return np.allclose(b, a_s * np.eye(b.shape[0]), rtol=0, atol=MATCH_TOL)
    if b is None or isinstance(b, complex):
        return _coef_equal(b, a)
    return a.shape == b.shape and np.allclose(a, b, rtol=0, atol=MATCH_TOL)


@dataclass(frozen=True)
class NCTerm:
    """One monomial with interleaved coefficients.

    ``indices`` are 0-based variable indices, ``adjoints[j]`` is True when
    the j-th factor is conjugate-transposed, and ``coefficients`` has
    ``len(indices) + 1`` entries (``None`` defaults to all identities).
    """

    indices: tuple
    adjoints: tuple = None
    coefficients: tuple = None

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(i < 0 for i in idx):
            raise ConfigurationError(f"variable indices must be >= 0, got {idx}")
        adj = tuple(bool(a) for a in self.adjoints) if self.adjoints is not None else (False,) * len(idx)
        if len(adj) != len(idx):
            raise ConfigurationError("adjoints must have one flag per factor")
        coefs = self.coefficients if self.coefficients is not None else (None,) * (len(idx) + 1)
        if len(coefs) != len(idx) + 1:
            raise ConfigurationError(f"a degree-{len(idx)} term needs {len(idx) + 1} coefficients, got {len(coefs)}")
        sizes = {np.shape(c)[0] for c in coefs if c is not None and not np.isscalar(c)}
        if len(sizes) > 1:
            raise ConfigurationError(f"coefficient sizes differ within a term: {sorted(sizes)}")
        n = sizes.pop() if sizes else None
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "adjoints", adj)
        object.__setattr__(self, "coefficients", tuple(_normalize_coefficient(c, n) for c in coefs))

    @property
    def degree(self):
        return len(self.indices)

    @property
    def size(self):
        for c in self.coefficients:
            if c is not None and not isinstance(c, complex):
                return c.shape[0]
        return None

    @property
    def key(self):
        return (self.degree, self.indices, self.adjoints)

    def adjoint(self):
        """Formal adjoint: reversed factors, flipped flags, adjoint coefficients."""
        return NCTerm(
            self.indices[::-1],
            tuple(not a for a in self.adjoints[::-1]),
            tuple(_coef_adjoint(c) for c in self.coefficients[::-1]),
        )

    def matches(self, other):
        return self.key == other.key and all(_coef_equal(a, b) for a, b in zip(self.coefficients, other.coefficients))

    def scaled(self, alpha):
        c0 = self.coefficients[0]
        if c0 is None or isinstance(c0, complex):
            new = complex(alpha) * (1.0 if c0 is None else c0)
        else:
            new = complex(alpha) * c0
        return NCTerm(self.indices, self.adjoints, (new,) + self.coefficients[1:])


def _real_scale(x, s):
    # divide real and imaginary parts separately; complex / real is not exact
    out = np.empty_like(x)
    out.real = x.real / s
    out.imag = x.imag / s
    return out


def _start(coef, n):
    """Leading coefficient as a matrix, or None for the identity (skips I @ x)."""
    if coef is None:
        return None
    if isinstance(coef, complex):
        return coef * np.eye(n, dtype=np.complex128)
    return coef.copy()


def _apply(acc, coef):
    if coef is None:
        return acc
    if isinstance(coef, complex):
        return acc * coef
    return acc @ coef


class NCPolynomial:
    """Sum of :class:`NCTerm` objects in ``n_vars`` matrix variables.

    Terms are kept in canonical order, sorted by (degree, indices, flags).
    """

    def __init__(self, terms, n_vars=None, n=None):
        terms = [t if isinstance(t, NCTerm) else NCTerm(**t) for t in terms]
        if not terms:
            raise ConfigurationError("a polynomial needs at least one term")
        self.terms = tuple(sorted(terms, key=lambda t: t.key))
        used = max((max(t.indices) + 1 for t in self.terms if t.indices), default=0)
        self.n_vars = used if n_vars is None else int(n_vars)
        if self.n_vars < used:
            raise ConfigurationError(f"terms reference {used} variables but n_vars = {self.n_vars}")
        sizes = {t.size for t in self.terms} - {None}
        if n is not None:
            sizes.add(int(n))
        if len(sizes) > 1:
            raise ConfigurationError(f"terms disagree on the matrix size: {sorted(sizes)}")
        self.n = sizes.pop() if sizes else None

    @property
    def degree(self):
        return max(t.degree for t in self.terms)

    def adjoint(self):
        return NCPolynomial([t.adjoint() for t in self.terms], self.n_vars, self.n)

    def scaled(self, alpha):
        """alpha * P, scaling every A^(0); needs |alpha| * ||A^(0)|| <= 1."""
        return NCPolynomial([t.scaled(alpha) for t in self.terms], self.n_vars, self.n)

    def __repr__(self):
        return f"NCPolynomial(degree={self.degree}, n_terms={len(self.terms)}, n_vars={self.n_vars})"


def _check_inputs(p, X):
    X = [check_matrix(x, name=f"X[{i}]").astype(np.complex128, copy=False) for i, x in enumerate(X)]
    if len(X) < p.n_vars:
        raise ContractViolation(f"polynomial uses {p.n_vars} variables, got {len(X)} matrices")
    shapes = {x.shape for x in X}
    if len(shapes) != 1:
        raise ContractViolation(f"all variables must share one shape, got {sorted(shapes)}")
    n, m = shapes.pop()
    if n != m:
        raise ContractViolation(f"variables must be square, got {(n, m)}")
    if p.n is not None and p.n != n:
        raise ContractViolation(f"coefficients are {p.n} x {p.n} but variables are {n} x {n}")
    return X, n


def evaluate(p, X):
    """Y = P(n^{-1/2} X_1, ..., n^{-1/2} X_L), complex n x n."""
    X, n = _check_inputs(p, X)
    root = np.sqrt(n)
    scaled = [_real_scale(x, root) for x in X]
    adjoints = [x.conj().T for x in scaled]
    out = np.zeros((n, n), dtype=np.complex128)
    for term in p.terms:
        acc = _start(term.coefficients[0], n)
        for j, (i, adj) in enumerate(zip(term.indices, term.adjoints)):
            factor = adjoints[i] if adj else scaled[i]
            acc = factor.copy() if acc is None else acc @ factor
            acc = _apply(acc, term.coefficients[j + 1])
        out += np.eye(n) if acc is None else acc
    return out


def is_formally_self_adjoint(p):
    """True iff the term multiset is invariant under the formal adjoint."""
    remaining = list(p.terms)
    for term in p.terms:
        adj = term.adjoint()
        for k, cand in enumerate(remaining):
            if cand.matches(adj):
                del remaining[k]
                break
        else:
            return False
    return not remaining


def trace_statistic(p, X):
    return complex(np.trace(evaluate(p, X)))


def poly_spectral_statistic(p, X, f):
    """sum_i f(gamma_i) over the eigenvalues of Y; P must be formally self-adjoint."""
    if not is_formally_self_adjoint(p):
        raise ContractViolation("spectral statistics need a formally self-adjoint polynomial")
    f = get_test_function(f) if isinstance(f, str) else f
    y = evaluate(p, X)
    y = 0.5 * (y + y.conj().T)
    ev = symmetric_eigenvalues(y)
    return float(np.sum(np.asarray(f(ev), dtype=np.float64) * np.ones_like(ev)))


# -- text format -------------------------------------------------------------
#
# variables: 2            # optional
# n: 4                    # optional unless a csv coefficient fixes it
# terms:
#   - indices: [1, 2]     # 1-based, as in x_1 x_2
#     adjoints: [false, true]
#     coefficients: [identity, {scaled_identity: -0.5}, {csv: a.csv}]

_TERM_KEYS = {"indices", "adjoints", "coefficients"}
_TOP_KEYS = {"variables", "n", "terms"}


def _parse_coefficient(spec, base):
    if spec is None or spec == "identity":
        return None
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return spec
    if isinstance(spec, dict) and len(spec) == 1:
        (kind, value), = spec.items()
        if kind == "scaled_identity":
            return complex(value) if not isinstance(value, (int, float)) else value
        if kind == "csv":
            path = Path(value)
            if not path.is_absolute():
                path = base / path
            with open(path, newline="") as fh:
                rows = [[complex(x.strip().replace("i", "j")) for x in row] for row in csv.reader(fh) if row]
            a = np.array(rows)
            return a.real if np.all(a.imag == 0) else a
    raise ConfigurationError(f"bad coefficient spec {spec!r}; use identity, {{scaled_identity: c}} or {{csv: path}}")


def polynomial_from_dict(d, base_dir="."):
    if not isinstance(d, dict):
        raise ConfigurationError("polynomial description must be a mapping")
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise ConfigurationError(f"unknown polynomial keys: {sorted(unknown)}")
    base = Path(base_dir)
    terms = []
    for k, t in enumerate(d.get("terms") or []):
        if not isinstance(t, dict):
            raise ConfigurationError(f"terms[{k}] must be a mapping")
        bad = set(t) - _TERM_KEYS
        if bad:
            raise ConfigurationError(f"terms[{k}]: unknown keys {sorted(bad)}")
        idx = t.get("indices", [])
        if any(not isinstance(i, int) or isinstance(i, bool) or i < 1 for i in idx):
            raise ConfigurationError(f"terms[{k}].indices must be 1-based positive integers, got {idx}")
        coefs = t.get("coefficients")
        if coefs is not None:
            coefs = [_parse_coefficient(c, base) for c in coefs]
        terms.append(NCTerm([i - 1 for i in idx], t.get("adjoints"), coefs))
    return NCPolynomial(terms, d.get("variables"), d.get("n"))


def load_polynomial(path):
    """Read a polynomial from a YAML or JSON file."""
    path = Path(path)
    text = path.read_text()
    data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    return polynomial_from_dict(data, base_dir=path.parent)
