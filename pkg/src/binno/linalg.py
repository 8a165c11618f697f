"""Dense real matrix helpers: validation, products, norms, thin SVD."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .exceptions import SvdConvergenceError


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce *a* to a finite float64 2-D array.

    Accepts nested sequences or ndarrays.  Raises ``ValueError`` on wrong
    dimensionality, empty axes, or non-finite entries.  Always returns a
    fresh array, so callers may treat the result as immutable input.
    """
    arr = np.array(a, dtype=np.float64, order="C")
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got {arr.ndim}-D")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have positive dimensions, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Standard matrix product with an explicit conformability check."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("matmul expects 2-D operands")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    return a @ b


def frobenius_norm(a: np.ndarray) -> float:
    """sqrt of the sum of squared entries."""
    return float(np.sqrt(np.sum(np.square(np.asarray(a, dtype=np.float64)))))


class SvdFactors(NamedTuple):
    """Thin SVD ``a = u @ diag(sigma) @ vt``.

    ``sigma`` is nonincreasing and nonnegative; ``u`` has orthonormal
    columns and ``vt`` orthonormal rows.  Column signs are normalized so the
    first nonzero entry of each left singular vector is nonnegative, making
    the factorization deterministic for a fixed input.
    """

    u: np.ndarray
    sigma: np.ndarray
    vt: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.vt


def svd(a: np.ndarray) -> SvdFactors:
    """Thin SVD with deterministic sign convention.

    Raises ``SvdConvergenceError`` if the backend fails to converge.
    """
    a = as_matrix(a, "svd input")
    try:
        u, sigma, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(
            f"SVD did not converge for shape {a.shape}: {exc}"
        ) from exc
    for j in range(u.shape[1]):
        col = u[:, j]
        nonzero = np.nonzero(col)[0]
        if nonzero.size and col[nonzero[0]] < 0:
            u[:, j] = -col
            vt[j, :] = -vt[j, :]
    return SvdFactors(u=u, sigma=sigma, vt=vt)


def singular_values(a: np.ndarray) -> np.ndarray:
    """Singular values only (nonincreasing), skipping the factor build."""
    a = np.asarray(a, dtype=np.float64)
    try:
        return np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(
            f"SVD did not converge for shape {a.shape}: {exc}"
        ) from exc


def spectral_norm(a: np.ndarray) -> float:
    """Largest singular value of *a*."""
    return float(singular_values(a)[0])


def nuclear_norm(a: np.ndarray) -> float:
    """Sum of singular values of *a*."""
    return float(np.sum(singular_values(a)))
