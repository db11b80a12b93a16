"""Two-stage generalized least-squares estimation.

First stage: the quadratic covariance estimate ``Y'WY`` with
``W = (I - sum_i P_{X_i}) / r``. Second stage: GLS for the mean with that
estimate plugged in, which has the closed form

    Theta_i = (X_i'X_i)^{-1} X_i' Y H_i Z_i (Z_i'Z_i)^{-1}
    H_i     = S^{-1} Z_i (Z_i' S^{-1} Z_i)^{-1} Z_i'

for every block, all sharing one covariance estimate ``S``. Because
``H_i Z_i (Z_i'Z_i)^{-1} = S^{-1} Z_i (Z_i'S^{-1}Z_i)^{-1} = G_i``, the
coefficients are computed as ``(X_i'X_i)^{-1} X_i' Y G_i`` with ``G_i`` taken
from a QR factorization of the whitened profile ``L^{-1} Z_i`` (``S = LL'``),
which avoids squaring the condition number of ``Z_i'S^{-1}Z_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from scipy.linalg import solve_triangular

from . import linalg as la
from .errors import (
    DegenerateCovariance,
    IllConditionedProfile,
    NonpositiveRmss,
    NotPositiveDefinite,
    ShapeMismatch,
    SizeLimit,
)
from .linalg import Matrix, SpdFactor
from .model import ModelSpec, ProfileMatrix

__all__ = [
    "VEC_FORM_LIMIT",
    "CovarianceEstimate",
    "FitResult",
    "aic",
    "covariance_estimate",
    "fit",
    "fit_vec_form",
    "h_matrix",
    "profile_weights",
    "quadratic_covariance",
    "rmss",
]

VEC_FORM_LIMIT = 4096

# Smallest Cholesky pivot (squared) allowed, relative to the data scale.
_DEGENERACY_RTOL = (1e3 * np.finfo(np.float64).eps) ** 2
_PROFILE_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    sigma_hat: Matrix
    r: int
    factor: SpdFactor

    @property
    def p(self) -> int:
        return self.sigma_hat.shape[0]

    def solve(self, b: ArrayLike) -> Matrix:
        """``sigma_hat^{-1} @ b``."""
        return self.factor.solve(b)


def covariance_estimate(sigma: ArrayLike, r: int, *, scale: float | None = None) -> CovarianceEstimate:
    """Wrap a covariance matrix, factorizing it.

    ``scale`` is the mean square of the data the matrix was computed from;
    when given, pivots that are tiny relative to it are treated as a
    degenerate (rank-deficient) covariance.
    """
    sigma = la.as_matrix(sigma, "covariance")
    sigma = 0.5 * (sigma + sigma.T)
    try:
        factor = la.spd_factor(sigma)
    except NotPositiveDefinite as exc:
        raise DegenerateCovariance(f"covariance estimate is singular (pivot {exc.pivot})") from exc
    if scale is not None:
        floor = _DEGENERACY_RTOL * max(scale, np.finfo(np.float64).tiny)
        if float(np.min(np.diag(factor.lower)) ** 2) <= floor:
            raise DegenerateCovariance("covariance estimate is numerically singular")
    return CovarianceEstimate(sigma, int(r), factor)


def _block_row_coefficients(y: Matrix, spec: ModelSpec) -> list[Matrix]:
    # (X_i'X_i)^{-1} X_i' Y, one m_i x p matrix per block
    return [spec.xtx_factor(i).solve(b.X.T @ y) for i, b in enumerate(spec.blocks)]


def quadratic_covariance(y: ArrayLike, spec: ModelSpec) -> CovarianceEstimate:
    """``Y'(I - sum_i P_{X_i})Y / r``.

    Computed as ``E'E / r`` with ``E = Y - sum_i P_{X_i} Y``; the two agree
    because the block projectors are mutually orthogonal.
    """
    y = spec.check_observations(y)
    resid = y - sum(b.X @ a for b, a in zip(spec.blocks, _block_row_coefficients(y, spec)))
    sigma = resid.T @ resid / spec.r
    return covariance_estimate(sigma, spec.r, scale=float(np.mean(y * y)))


def _profile_matrix(z: ProfileMatrix | ArrayLike) -> Matrix:
    return z.matrix if isinstance(z, ProfileMatrix) else la.as_matrix(z, "Z")


def profile_weights(cov: CovarianceEstimate, z: ProfileMatrix | ArrayLike) -> Matrix:
    """``G = S^{-1} Z (Z'S^{-1}Z)^{-1}`` (``p x q``), so that ``H = G Z'``.

    With ``S = LL'`` and ``L^{-1}Z = QR``, ``G = L^{-T} Q R^{-T}``.
    """
    zm = _profile_matrix(z)
    if zm.shape[0] != cov.p:
        raise ShapeMismatch(f"profile has {zm.shape[0]} rows, covariance is {cov.p}x{cov.p}")
    lower = cov.factor.lower
    q, r = np.linalg.qr(solve_triangular(lower, zm, lower=True))
    d = np.abs(np.diag(r))
    if d.size and not float(np.min(d)) > _PROFILE_RTOL * float(np.max(d)):
        raise IllConditionedProfile("Z' S^{-1} Z is numerically singular")
    g = solve_triangular(lower.T, q, lower=False)
    return solve_triangular(r, g.T, lower=False).T


def h_matrix(cov: CovarianceEstimate, z: ProfileMatrix | ArrayLike) -> Matrix:
    """Oblique projector ``S^{-1} Z (Z'S^{-1}Z)^{-1} Z'``; satisfies ``Z'H = Z'``."""
    return profile_weights(cov, z) @ _profile_matrix(z).T


def rmss(y: ArrayLike, mean_hat: ArrayLike) -> float:
    """Residual matrix sum of squares ``tr((Y - mu)'(Y - mu))``."""
    r = np.asarray(y, dtype=np.float64) - np.asarray(mean_hat, dtype=np.float64)
    return float(np.sum(r * r))


def aic(rmss_value: float, n: int, n_params: int) -> float:
    """``n ln(RMSS) + 2(n_params + 1) - n ln(n)``."""
    if not rmss_value > 0:
        raise NonpositiveRmss(rmss_value)
    return n * math.log(rmss_value) + 2 * (n_params + 1) - n * math.log(n)


@dataclass(frozen=True, eq=False)
class FitResult:
    coefficients: tuple[Matrix, ...]
    mean_hat: Matrix
    residual: Matrix
    rmss: float
    aic: float
    n_params: int
    covariance: CovarianceEstimate
    h_matrices: tuple[Matrix, ...]

    @property
    def n(self) -> int:
        return self.mean_hat.shape[0]


def _finish(y: Matrix, spec: ModelSpec, coefs, mean_hat, cov, hs) -> FitResult:
    resid = y - mean_hat
    value = float(np.sum(resid * resid))
    return FitResult(
        coefficients=tuple(coefs),
        mean_hat=mean_hat,
        residual=resid,
        rmss=value,
        aic=aic(value, spec.n, spec.n_params),
        n_params=spec.n_params,
        covariance=cov,
        h_matrices=tuple(hs),
    )


def fit(y: ArrayLike, spec: ModelSpec, *, sigma: ArrayLike | None = None) -> FitResult:
    """Two-stage GLS fit.

    ``sigma`` overrides the first-stage covariance estimate (useful for
    testing against OLS with ``sigma = I`` or against a known truth).
    """
    y = spec.check_observations(y)
    rows = _block_row_coefficients(y, spec)
    if sigma is None:
        resid = y - sum(b.X @ a for b, a in zip(spec.blocks, rows))
        cov = covariance_estimate(resid.T @ resid / spec.r, spec.r, scale=float(np.mean(y * y)))
    else:
        cov = covariance_estimate(sigma, spec.r)
        if cov.p != spec.p:
            raise ShapeMismatch(f"sigma must be {spec.p}x{spec.p}")
    coefs, hs = [], []
    mean_hat = np.zeros_like(y)
    for b, a in zip(spec.blocks, rows):
        g = profile_weights(cov, b.Z)
        theta = a @ g
        coefs.append(theta)
        mean_hat += b.X @ theta @ b.Z.matrix.T
        hs.append(g @ b.Z.matrix.T)
    return _finish(y, spec, coefs, mean_hat, cov, hs)


def fit_vec_form(y: ArrayLike, spec: ModelSpec, *, max_size: int = VEC_FORM_LIMIT) -> FitResult:
    """Same estimator computed with ``np x np`` Kronecker operators.

    ``vec(mu) = sum_i (P_{X_i} kron Z_i (Z_i'S^{-1}Z_i)^+ Z_i'S^{-1}) vec(Y)``
    with explicit projectors, explicit inverse and pseudoinverses. Intended
    as an independent cross-check of :func:`fit` on small problems.
    """
    y = spec.check_observations(y)
    if spec.n * spec.p > max_size:
        raise SizeLimit(spec.n * spec.p, max_size)
    projectors = [la.projector(b.X, b.label or i) for i, b in enumerate(spec.blocks)]
    w = (np.eye(spec.n) - sum(projectors)) / spec.r
    cov = covariance_estimate(y.T @ w @ y, spec.r, scale=float(np.mean(y * y)))
    s_inv = np.linalg.inv(cov.sigma_hat)
    vy = la.vec(y)
    vmu = np.zeros_like(vy)
    coefs, hs = [], []
    for b, proj in zip(spec.blocks, projectors):
        z = b.Z.matrix
        m_i = z @ la.pinv(z.T @ s_inv @ z) @ z.T @ s_inv
        vmu += la.kron(proj, m_i) @ vy
        vtheta = la.kron(la.pinv(b.X), la.pinv(z) @ m_i) @ vy
        coefs.append(la.unvec(vtheta, b.m, b.q))
        hs.append(m_i.T)
    return _finish(y, spec, coefs, la.unvec(vmu, spec.n, spec.p), cov, hs)
