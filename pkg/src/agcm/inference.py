"""Large-sample quantities for the coefficient estimators.

The plug-in covariance of ``sqrt(n) vec(Theta_i_hat - Theta_i)`` (row-stacked
vec) is ``n (X_i'X_i)^{-1} kron (Z_i' S^{-1} Z_i)^{-1}``. This is the form
that makes the standardized statistic below asymptotically ``N(0, I)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike

from . import linalg as la
from .errors import (
    IllConditionedProfile,
    NonsingularityViolated,
    NotPositiveDefinite,
    ShapeMismatch,
)
from .estimation import CovarianceEstimate, FitResult, covariance_estimate
from .linalg import Matrix
from .model import ModelSpec

__all__ = [
    "AsymptoticReport",
    "Hypothesis",
    "coeff_asymptotic_covariance",
    "fourth_moment_covariance",
    "gaussian_fourth_moment_covariance",
    "standardized_statistic",
]


@dataclass(frozen=True, eq=False)
class Hypothesis:
    """Null hypothesis ``C Theta_i V' = 0`` on block ``block``."""

    block: int
    C: Matrix
    V: Matrix

    def __post_init__(self) -> None:
        object.__setattr__(self, "C", la.as_matrix(np.atleast_2d(self.C), "C"))
        object.__setattr__(self, "V", la.as_matrix(np.atleast_2d(self.V), "V"))


@dataclass(eq=False)
class AsymptoticReport:
    """Monte Carlo against theory for one block (see ``simulation.normality_check``)."""

    block: int
    n: int
    replications: int
    row_factor: Matrix
    column_factor: Matrix
    theoretical: Matrix
    empirical: Matrix
    relative_error: float
    cross_block: dict[int, Matrix] = field(default_factory=dict)
    cross_block_z: dict[int, Matrix] = field(default_factory=dict)
    cross_sigma: Matrix | None = None
    cross_sigma_z: Matrix | None = None
    phi2_empirical: Matrix | None = None
    phi2_theoretical: Matrix | None = None
    phi2_residual: Matrix | None = None
    marginal_skewness: np.ndarray | None = None
    marginal_excess_kurtosis: np.ndarray | None = None
    statistic_mean: np.ndarray | None = None
    statistic_variance: np.ndarray | None = None
    failures: int = 0


def _as_covariance(cov: CovarianceEstimate | ArrayLike, r: int) -> CovarianceEstimate:
    return cov if isinstance(cov, CovarianceEstimate) else covariance_estimate(cov, r)


def coeff_asymptotic_covariance(
    spec: ModelSpec, cov: CovarianceEstimate | ArrayLike, i: int
) -> tuple[Matrix, Matrix]:
    """Return ``(n (X_i'X_i)^{-1}, (Z_i' S^{-1} Z_i)^{-1})``.

    ``cov`` may be a fitted estimate or a known covariance matrix.
    """
    cov = _as_covariance(cov, spec.r)
    block = spec.blocks[i]
    row = spec.n * spec.xtx_factor(i).inverse()
    z = block.Z.matrix
    info = z.T @ cov.solve(z)
    try:
        col = la.spd_inverse(0.5 * (info + info.T))
    except NotPositiveDefinite as exc:
        raise IllConditionedProfile(f"Z_{i}' S^-1 Z_{i} is singular") from exc
    return row, col


def standardized_statistic(fit: FitResult, spec: ModelSpec, hyp: Hypothesis) -> Matrix:
    """``(C n(X'X)^{-1} C')^{-1/2} sqrt(n) C Theta V' (V (Z'S^{-1}Z)^{-1} V')^{-1/2}``.

    Symmetric inverse square roots are used on both sides.
    """
    i = hyp.block
    m, q = spec.coefficient_shapes()[i]
    if hyp.C.shape[1] != m or hyp.V.shape[1] != q:
        raise ShapeMismatch(f"C must have {m} columns and V {q} columns for block {i}")
    row, col = coeff_asymptotic_covariance(spec, fit.covariance, i)
    left = la.inv_sqrt_sym(hyp.C @ row @ hyp.C.T)
    if left is None:
        raise NonsingularityViolated("C n(X'X)^-1 C'")
    right = la.inv_sqrt_sym(hyp.V @ col @ hyp.V.T)
    if right is None:
        raise NonsingularityViolated("V (Z'S^-1 Z)^-1 V'")
    return left @ (np.sqrt(spec.n) * hyp.C @ fit.coefficients[i] @ hyp.V.T) @ right


def fourth_moment_covariance(rows: ArrayLike) -> Matrix:
    """Empirical ``Cov(e kron e)`` (``p^2 x p^2``) from error-like rows ``e``."""
    e = la.as_matrix(rows, "rows")
    outer = np.einsum("na,nb->nab", e, e).reshape(e.shape[0], -1)
    return np.cov(outer, rowvar=False, bias=True)


def gaussian_fourth_moment_covariance(sigma: ArrayLike) -> Matrix:
    """Closed form of ``Cov(e kron e)`` for ``e ~ N(0, sigma)``.

    Entry ``(ab, cd)`` is ``s_ac s_bd + s_ad s_bc`` (row-stacked index ``a*p+b``).
    """
    s = la.as_matrix(sigma, "sigma")
    p = s.shape[0]
    t = np.einsum("ac,bd->abcd", s, s) + np.einsum("ad,bc->abcd", s, s)
    return t.reshape(p * p, p * p)
