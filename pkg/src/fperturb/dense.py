"""Dense matrix kernels: factorizations, norms, and triangular inverses.

Matrices are plain 2-D float64 ``numpy.ndarray`` values. Vectorized forms
elsewhere in the package stack columns (Fortran order), so a matrix and its
``vec`` agree on column-major semantics.

The LU factorization here is deliberately pivot-free: the perturbation theory
bounds the factors of ``A`` itself, and row exchanges would change the object
being bounded. The QR factorization normalizes the triangular factor to a
strictly positive diagonal, which makes it unique for full-column-rank input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    DimensionMismatch,
    NoConvergence,
    RankDeficient,
    SingularDiagonal,
    SingularLeadingMinor,
)

# Tolerances, chosen with double-precision headroom over machine epsilon.
PIVOT_TOL = 1e-13          # relative pivot threshold for pivot-free LU
RANK_TOL = 1e-12           # relative smallest-singular-value threshold for QR
RECONSTRUCT_TOL = 1e-11    # relative reconstruction accuracy contract
SPECTRAL_TOL = 1e-12       # relative convergence tolerance of power iteration
POWER_MAX_ITER = 10_000
EXPLICIT_THRESHOLD = 4096  # largest vec-dimension that may be materialized


class NormKind(Enum):
    SPECTRAL = "spectral"
    FROBENIUS = "frobenius"
    MAX_ENTRY = "max_entry"
    SUM_ENTRY = "sum_entry"


@dataclass(frozen=True)
class LuFactors:
    """Pivot-free LU factors: ``l`` unit lower triangular, ``u`` upper triangular."""

    l: np.ndarray
    u: np.ndarray


@dataclass(frozen=True)
class QrFactors:
    """QR factors: ``q`` with orthonormal columns, ``r`` upper triangular, diag(r) > 0."""

    q: np.ndarray
    r: np.ndarray


def _as_matrix(a, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got ndim={a.ndim}")
    if not np.isfinite(a).all():
        raise ValueError(f"{name} has non-finite entries")
    return a


def _as_square(a, name: str = "matrix") -> np.ndarray:
    a = _as_matrix(a, name)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    return a


def lu_factor(a, pivot_tol: float = PIVOT_TOL) -> LuFactors:
    """Pivot-free Doolittle LU factorization of a square matrix.

    Raises :class:`SingularLeadingMinor` with the 1-based pivot index when a
    pivot used as a divisor falls below ``pivot_tol * ||a||_F``. The trailing
    diagonal entry of ``u`` is never used as a divisor and is not gated; a
    singular last pivot surfaces later, when ``u`` has to be inverted.
    """
    a = _as_square(a)
    n = a.shape[0]
    scale = np.linalg.norm(a)
    u = a.copy()
    l = np.eye(n)
    for k in range(n - 1):
        piv = u[k, k]
        if abs(piv) <= pivot_tol * scale:
            raise SingularLeadingMinor(k + 1)
        mults = u[k + 1 :, k] / piv
        l[k + 1 :, k] = mults
        u[k + 1 :, k:] -= np.outer(mults, u[k, k:])
        u[k + 1 :, k] = 0.0
    return LuFactors(l=l, u=np.triu(u))


def qr_factor(a, rank_tol: float = RANK_TOL) -> QrFactors:
    """QR factorization with positive diagonal of the triangular factor.

    Householder QR followed by a column-wise sign fix so that diag(r) > 0,
    which pins down the unique factorization. A square input that is already
    upper triangular with positive diagonal is returned as (I, a) exactly;
    graded triangular test matrices rely on the orthonormal factor being the
    identity without rounding noise.
    """
    a = _as_matrix(a)
    m, n = a.shape
    if m < n:
        raise DimensionMismatch(f"qr_factor needs m >= n, got shape {a.shape}")
    if m == n and not np.tril(a, -1).any() and np.all(np.diag(a) > 0.0):
        return QrFactors(q=np.eye(n), r=a.copy())
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] <= rank_tol * s[0]:
        raise RankDeficient(f"smallest singular value {s[-1]:.3e} below rank tolerance")
    q, r = np.linalg.qr(a, mode="reduced")
    signs = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    return QrFactors(q=q * signs[None, :], r=r * signs[:, None])


def abs_matrix(a) -> np.ndarray:
    """Entrywise absolute value."""
    return np.abs(_as_matrix(a))


def triangular_inverse(t, shape: str) -> np.ndarray:
    """Invert a triangular matrix by substitution; result keeps the shape.

    ``shape`` is ``"lower"`` or ``"upper"``. Raises :class:`SingularDiagonal`
    with the 1-based index of the first exactly-zero diagonal entry.
    """
    t = _as_square(t, "triangular matrix")
    n = t.shape[0]
    diag = np.diag(t)
    zero = np.flatnonzero(diag == 0.0)
    if zero.size:
        raise SingularDiagonal(int(zero[0]) + 1)
    x = np.eye(n)
    if shape == "upper":
        for i in range(n - 1, -1, -1):
            x[i, :] = (x[i, :] - t[i, i + 1 :] @ x[i + 1 :, :]) / t[i, i]
        return np.triu(x)
    if shape == "lower":
        for i in range(n):
            x[i, :] = (x[i, :] - t[i, :i] @ x[:i, :]) / t[i, i]
        return np.tril(x)
    raise ValueError(f"shape must be 'lower' or 'upper', got {shape!r}")


def _power_spectral_norm(matvec, rmatvec, dim_in: int,
                         tol: float = SPECTRAL_TOL,
                         max_iter: int = POWER_MAX_ITER) -> float:
    """Largest singular value of a linear map given by matvec/rmatvec.

    Power iteration on the normal operator, started from the normalized
    all-ones vector, stopping on the relative change of the singular-value
    estimate. The returned value is the final Rayleigh quotient ``||A v||``
    for the last normalized right vector, i.e. a certified lower estimate.
    """
    if dim_in == 0:
        return 0.0
    v = np.full(dim_in, 1.0 / math.sqrt(dim_in))
    restart = 0
    sigma_prev = -1.0
    for _ in range(max_iter):
        u = matvec(v)
        if u.size == 0:
            return 0.0
        nu = float(np.linalg.norm(u))
        if nu == 0.0:
            # The start vector happens to lie in the null space; probe basis
            # directions deterministically before concluding the map is zero.
            if restart >= dim_in:
                return 0.0
            v = np.zeros(dim_in)
            v[restart] = 1.0
            restart += 1
            continue
        w = rmatvec(u / nu)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return nu
        v = w / nw
        if sigma_prev >= 0.0 and abs(nw - sigma_prev) <= tol * nw:
            return float(np.linalg.norm(matvec(v)))
        sigma_prev = nw
    raise NoConvergence(max_iter)


def spectral_norm(a, tol: float = SPECTRAL_TOL, max_iter: int = POWER_MAX_ITER) -> float:
    """Spectral norm of a dense matrix via power iteration."""
    a = _as_matrix(a)
    if a.size == 0:
        return 0.0
    return _power_spectral_norm(lambda v: a @ v, lambda u: a.T @ u, a.shape[1],
                                tol=tol, max_iter=max_iter)


def svd_spectral_norm(a) -> float:
    """Spectral norm through a full dense SVD; the oracle route for checks."""
    a = _as_matrix(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.svd(a, compute_uv=False)[0])


def smallest_singular_value(a) -> float:
    """Smallest singular value; for full-column-rank ``a``, ``1/sigma_min = ||a^+||_2``."""
    a = _as_matrix(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.svd(a, compute_uv=False)[-1])


def norm(a, kind: NormKind) -> float:
    """Matrix norm of the requested kind.

    Spectral uses power iteration (see :func:`spectral_norm`); the max-entry
    and sum-entry norms are the entrywise max and sum of absolute values.
    """
    a = _as_matrix(a)
    if kind is NormKind.FROBENIUS:
        return float(np.linalg.norm(a))
    if kind is NormKind.MAX_ENTRY:
        return float(np.max(np.abs(a))) if a.size else 0.0
    if kind is NormKind.SUM_ENTRY:
        return float(np.sum(np.abs(a)))
    if kind is NormKind.SPECTRAL:
        return spectral_norm(a)
    raise ValueError(f"unknown norm kind {kind!r}")


def kappa2_triangular(t, shape: str) -> float:
    """Spectral condition number of a nonsingular triangular matrix."""
    return spectral_norm(t) * spectral_norm(triangular_inverse(t, shape))
