"""Dense matrix kernels.

``vec`` stacks ROWS, so that ``vec(A @ B @ C) == kron(A, C.T) @ vec(B)``.
Inverse-like quantities are applied through Cholesky factors; explicit
matrices are only formed where one has to be returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import cho_solve
from scipy.linalg.lapack import dpotrf

from .errors import NotPositiveDefinite, RankDeficient, ShapeMismatch

__all__ = [
    "SpdFactor",
    "as_matrix",
    "inv_sqrt_sym",
    "kron",
    "matrix_rank",
    "pinv",
    "projector",
    "spd_factor",
    "spd_inverse",
    "spd_solve",
    "sqrt_sym",
    "unvec",
    "vec",
]

Matrix = NDArray[np.float64]


def as_matrix(a: ArrayLike, name: str = "matrix") -> Matrix:
    """Coerce to a finite, non-empty 2-D float array (1-D input becomes a column)."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeMismatch(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ShapeMismatch(f"{name} has non-finite entries")
    return m


def _svd_cutoff(s: NDArray[np.float64], shape: tuple[int, int]) -> float:
    if s.size == 0:
        return 0.0
    return max(shape) * s[0] * np.finfo(np.float64).eps


def pinv(a: ArrayLike) -> Matrix:
    """Moore-Penrose inverse via SVD.

    Singular values at or below ``max(rows, cols) * s_max * eps`` are
    treated as zero.
    """
    a = as_matrix(a)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    keep = s > _svd_cutoff(s, a.shape)
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (vt.T * s_inv) @ u.T


def matrix_rank(a: ArrayLike) -> int:
    a = as_matrix(a)
    s = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(s > _svd_cutoff(s, a.shape)))


def projector(x: ArrayLike, label: str | int = "X") -> Matrix:
    """Orthogonal projection onto the column space of a full-column-rank ``x``."""
    x = as_matrix(x, str(label))
    rank = matrix_rank(x)
    if rank < x.shape[1]:
        raise RankDeficient(label, rank, x.shape[1])
    q, _ = np.linalg.qr(x)
    p = q @ q.T
    return 0.5 * (p + p.T)


@dataclass(frozen=True)
class SpdFactor:
    """Lower Cholesky factor ``lower`` with ``lower @ lower.T == matrix``."""

    lower: Matrix

    @property
    def dimension(self) -> int:
        return self.lower.shape[0]

    def solve(self, b: ArrayLike) -> Matrix:
        b = np.asarray(b, dtype=np.float64)
        return cho_solve((self.lower, True), b, check_finite=False)

    def inverse(self) -> Matrix:
        inv = self.solve(np.eye(self.dimension))
        return 0.5 * (inv + inv.T)

    def reconstruct(self) -> Matrix:
        return self.lower @ self.lower.T

    def logdet(self) -> float:
        return float(2.0 * np.sum(np.log(np.diag(self.lower))))


def spd_factor(a: ArrayLike, *, sym_tol: float = 1e-10) -> SpdFactor:
    """Cholesky factorization of a symmetric positive definite matrix.

    Raises ``NotPositiveDefinite`` carrying the 0-based index of the first
    non-positive pivot.
    """
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > sym_tol * scale:
        raise NotPositiveDefinite(-1, "matrix is not symmetric")
    c, info = dpotrf(a, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefinite(int(info) - 1)
    if info < 0:  # pragma: no cover - LAPACK argument error
        raise ValueError(f"dpotrf argument {-info} invalid")
    return SpdFactor(np.tril(c))


def spd_solve(a: ArrayLike | SpdFactor, b: ArrayLike) -> Matrix:
    """Solve ``a @ x = b`` for symmetric positive definite ``a``."""
    factor = a if isinstance(a, SpdFactor) else spd_factor(a)
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != factor.dimension:
        raise ShapeMismatch(f"right-hand side has {b.shape[0]} rows, expected {factor.dimension}")
    return factor.solve(b)


def spd_inverse(a: ArrayLike | SpdFactor) -> Matrix:
    factor = a if isinstance(a, SpdFactor) else spd_factor(a)
    return factor.inverse()


def kron(a: ArrayLike, b: ArrayLike) -> Matrix:
    """Kronecker product in the blockwise ``(a_ij * b)`` layout."""
    return np.kron(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))


def vec(a: ArrayLike) -> Matrix:
    """Stack the rows of ``a`` into a column vector."""
    a = np.asarray(a, dtype=np.float64)
    return a.reshape(-1, 1)


def unvec(v: ArrayLike, rows: int, cols: int) -> Matrix:
    """Inverse of :func:`vec`."""
    v = np.asarray(v, dtype=np.float64)
    if v.size != rows * cols:
        raise ShapeMismatch(f"cannot reshape {v.size} entries to {rows}x{cols}")
    return v.reshape(rows, cols)


def _sym_eig(a: ArrayLike) -> tuple[NDArray[np.float64], Matrix]:
    a = np.asarray(a, dtype=np.float64)
    return np.linalg.eigh(0.5 * (a + a.T))


def sqrt_sym(a: ArrayLike) -> Matrix:
    """Symmetric PSD square root; small negative eigenvalues are clipped."""
    w, v = _sym_eig(a)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def inv_sqrt_sym(a: ArrayLike, rtol: float = 1e-12) -> Matrix | None:
    """Symmetric inverse square root, or ``None`` if ``a`` is numerically singular."""
    w, v = _sym_eig(a)
    if w.size == 0 or w[0] <= rtol * max(abs(w[-1]), np.finfo(float).tiny):
        return None
    return (v / np.sqrt(w)) @ v.T
