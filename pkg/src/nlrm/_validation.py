"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""

from numbers import Integral, Real

import numpy as np

from .exceptions import ConfigurationError, ContractViolation


def check_matrix(m, name="matrix", allow_complex=True, error=ContractViolation):
    """Return ``m`` as a finite 2-D float64 (or complex128) array.

    1-D input is promoted to a single row, scalars to 1x1.
    """
    arr = np.asarray(m)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise error(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise error(f"{name} must have at least one row and column, got {arr.shape}")
    if np.iscomplexobj(arr):
        if not allow_complex:
            raise error(f"{name} must be real")
        arr = arr.astype(np.complex128, copy=False)
    else:
        arr = arr.astype(np.float64, copy=False)
    if not np.all(np.isfinite(arr)):
        raise error(f"{name} contains non-finite entries")
    return arr


def check_positive_int(value, name, minimum=1, error=ConfigurationError):
    if isinstance(value, bool) or not isinstance(value, Integral):
        raise error(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise error(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_positive_real(value, name, strict=True, error=ConfigurationError):
    if isinstance(value, bool) or not isinstance(value, Real):
        raise error(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not np.isfinite(value) or value < 0 or (strict and value == 0):
        bound = "> 0" if strict else ">= 0"
        raise error(f"{name} must be finite and {bound}, got {value}")
    return value


def check_shape(shape, name="shape"):
    try:
        rows, cols = shape
    except (TypeError, ValueError):
        raise ConfigurationError(f"{name} must be a pair (rows, cols), got {shape!r}") from None
    return (check_positive_int(rows, f"{name}[0]"), check_positive_int(cols, f"{name}[1]"))


def check_hermitian(m, tol=1e-10, name="matrix"):
    """Raise unless ``m`` is square and Hermitian within ``tol`` (scaled by its size)."""
    if m.shape[0] != m.shape[1]:
        raise ContractViolation(f"{name} must be square, got {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m))))
    err = float(np.max(np.abs(m - m.conj().T)))
    if err > tol * scale:
        raise ContractViolation(
            f"{name} is not symmetric/Hermitian: max |m - m^*| = {err:.3e} > {tol * scale:.3e}"
        )
