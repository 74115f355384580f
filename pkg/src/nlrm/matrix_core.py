"""Dense matrices, initializer samplers and spectral primitives.

Matrices are plain 2-D :class:`numpy.ndarray` objects (float64, or
complex128 where non-commutative polynomials need it).  Samplers return
read-only arrays so that a sampled network can be shared between threads.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_hermitian, check_matrix, check_positive_int, check_positive_real, check_shape
from .exceptions import ConfigurationError, ContractViolation, NumericalError

# canonical name -> accepted aliases
SAMPLER_KINDS = {
    "gaussian_iid": ("gaussian",),
    "uniform_iid": ("uniform",),
    "sphere_uniform": ("sphere",),
    "haar_orthogonal": ("haar",),
    "zero": (),
}
_ALIASES = {alias: kind for kind, aliases in SAMPLER_KINDS.items() for alias in (kind, *aliases)}

# Every shipped law is centered and symmetric about the origin; kept as data
# so that regime checks do not silently start passing if a new kind is added.
SYMMETRIC_KINDS = frozenset(SAMPLER_KINDS)
CENTERED_KINDS = frozenset(SAMPLER_KINDS)


@dataclass(frozen=True)
class SamplerSpec:
    """Distribution of one random block.

    ``scale`` is the standard deviation for ``gaussian_iid`` and the
    half-width for ``uniform_iid``; it is ignored by the other kinds.
    ``shape`` may be left ``None`` and supplied when sampling.
    """

    kind: str = "gaussian_iid"
    scale: float = 1.0
    shape: tuple = None

    def __post_init__(self):
        try:
            kind = _ALIASES[self.kind]
        except KeyError:
            raise ConfigurationError(
                f"unknown sampler kind {self.kind!r}; expected one of {sorted(SAMPLER_KINDS)}"
            ) from None
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "scale", check_positive_real(self.scale, "scale", strict=False))
        if self.shape is not None:
            object.__setattr__(self, "shape", check_shape(self.shape))

    def with_shape(self, shape):
        return SamplerSpec(self.kind, self.scale, shape)

    @property
    def is_symmetric(self):
        return self.kind in SYMMETRIC_KINDS

    @property
    def is_centered(self):
        return self.kind in CENTERED_KINDS

    def to_dict(self):
        return {"kind": self.kind, "scale": self.scale}


def _frozen(a):
    a.flags.writeable = False
    return a


def haar_orthogonal(n, rng):
    """Haar-distributed n x n orthogonal matrix.

    QR of an i.i.d. Gaussian matrix, with the columns of Q multiplied by the
    signs of diag(R) so that the law is exactly Haar rather than biased by
    the QR sign convention.
    """
    n = check_positive_int(n, "n")
    g = rng.generator.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def sample(spec, rng, shape=None):
    """Draw one matrix from ``spec``.

    ``shape`` overrides ``spec.shape``.  The result is read-only.
    """
    shape = check_shape(shape if shape is not None else spec.shape)
    rows, cols = shape
    gen = rng.generator
    if spec.kind == "zero":
        out = np.zeros(shape)
    elif spec.kind == "gaussian_iid":
        out = gen.standard_normal(shape)
        if spec.scale != 1.0:
            out *= spec.scale
    elif spec.kind == "uniform_iid":
        out = gen.uniform(-spec.scale, spec.scale, size=shape)
    elif spec.kind == "sphere_uniform":
        g = gen.standard_normal(shape)
        norm = np.linalg.norm(g)
        if norm == 0.0:  # probability zero; redraw deterministically from the same stream
            return sample(spec, rng, shape)
        out = g * (np.sqrt(rows * cols) / norm)
    else:  # haar_orthogonal
        n = max(rows, cols)
        out = np.sqrt(n) * haar_orthogonal(n, rng)[:rows, :cols]
        out = np.ascontiguousarray(out)
    return _frozen(out)


def _round_robin(n):
    """Pairings of 0..n-1 (n even) such that every pair meets once per sweep."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        rounds.append((np.array(players[:half]), np.array(players[half:][::-1])))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_singular_values(m, tol=1e-12, max_sweeps=None):
    """Singular values by one-sided (Hestenes) Jacobi rotations.

    Columns are orthogonalized in round-robin order, n/2 disjoint pairs at
    a time.  Iteration stops when every pair has
    ``|<a_p, a_q>| <= tol * |a_p| |a_q|``; after ``max_sweeps`` sweeps
    (default ``100 * n``) a :class:`NumericalError` is raised with the
    residual.  Slower than LAPACK; kept as an independent route.
    """
    a = check_matrix(m, allow_complex=False)
    if a.shape[0] < a.shape[1]:
        a = a.T
    a = np.array(a, dtype=np.float64, order="F", copy=True)
    n_true = a.shape[1]
    if n_true == 1:
        return np.array([np.linalg.norm(a)])
    if n_true % 2:
        a = np.hstack([a, np.zeros((a.shape[0], 1))])
    n = a.shape[1]
    if max_sweeps is None:
        max_sweeps = 100 * n
    rounds = _round_robin(n)
    tiny = np.finfo(np.float64).tiny
    off = np.inf
    for sweep in range(1, max_sweeps + 1):
        off = 0.0
        for p, q in rounds:
            ap, aq = a[:, p], a[:, q]
            alpha = np.einsum("ij,ij->j", ap, ap)
            beta = np.einsum("ij,ij->j", aq, aq)
            gamma = np.einsum("ij,ij->j", ap, aq)
            denom = np.sqrt(alpha * beta)
            active = (denom > tiny) & (np.abs(gamma) > tol * denom)
            if not active.any():
                continue
            off = max(off, float(np.max(np.abs(gamma[active]) / denom[active])))
            zeta = (beta[active] - alpha[active]) / (2.0 * gamma[active])
            t = np.sign(zeta) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            t[zeta == 0] = 1.0
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            pa, qa = p[active], q[active]
            new_p = c * a[:, pa] - s * a[:, qa]
            new_q = s * a[:, pa] + c * a[:, qa]
            a[:, pa] = new_p
            a[:, qa] = new_q
        if off <= tol:
            sv = np.sort(np.linalg.norm(a, axis=0))[::-1]
            return sv[:n_true]
    raise NumericalError(
        f"one-sided Jacobi did not converge in {max_sweeps} sweeps",
        sweeps=max_sweeps,
        off_diagonal=off,
        tolerance=tol,
    )


def singular_values(m, method="lapack"):
    """Singular values of ``m`` in non-increasing order.

    ``method="lapack"`` uses the Golub-Kahan based LAPACK driver,
    ``method="jacobi"`` the in-house :func:`jacobi_singular_values`.
    """
    a = check_matrix(m)
    if method == "jacobi":
        return jacobi_singular_values(a)
    if method != "lapack":
        raise ContractViolation(f"unknown SVD method {method!r}")
    try:
        sv = np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed to converge: {exc}", shape=a.shape) from exc
    return np.maximum(sv, 0.0)


def operator_norm(m, method="lapack"):
    """Largest singular value."""
    return float(singular_values(m, method=method)[0])


def hs_norm(m):
    """Hilbert-Schmidt (Frobenius) norm."""
    a = np.abs(check_matrix(m))
    scale = a.max()
    if scale == 0.0:
        return 0.0
    # scaled so that squaring neither underflows nor overflows
    return float(scale * np.sqrt(np.sum((a / scale) ** 2)))


def symmetric_eigenvalues(m, tol=1e-10):
    """Eigenvalues of a symmetric/Hermitian matrix, non-increasing."""
    a = check_matrix(m)
    check_hermitian(a, tol=tol)
    try:
        ev = np.linalg.eigvalsh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"symmetric eigensolver failed: {exc}", shape=a.shape) from exc
    return ev[::-1].copy()
