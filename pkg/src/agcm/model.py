"""Design blocks, polynomial profiles and validated model specifications.

A model is ``Y = sum_i X_i Theta_i Z_i' + E`` where the ``X_i`` have mutually
orthogonal column spaces and every ``Z_i`` is evaluated on the same
timepoints.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike

from . import linalg as la
from .errors import (
    DegenerateTimepoints,
    EmptyDesign,
    InsufficientResidualDof,
    MixedTimepoints,
    NotOrthogonal,
    RankDeficient,
    ShapeMismatch,
)
from .linalg import Matrix, SpdFactor

__all__ = [
    "DesignBlock",
    "ModelSpec",
    "ProfileMatrix",
    "build_group_indicator",
    "build_polynomial_profile",
    "indicator_spec",
    "validate",
]

ORTHOGONALITY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ProfileMatrix:
    """A ``p x q`` profile basis evaluated at ``timepoints``.

    ``degree`` is ``None`` for bases that are not plain monomials (for
    instance a reparameterized polynomial basis ``Z @ B``).
    """

    timepoints: np.ndarray
    matrix: Matrix
    degree: int | None = None

    @property
    def p(self) -> int:
        return self.matrix.shape[0]

    @property
    def q(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def from_matrix(cls, timepoints: ArrayLike, matrix: ArrayLike) -> ProfileMatrix:
        t = np.asarray(timepoints, dtype=np.float64).ravel()
        z = la.as_matrix(matrix, "profile matrix")
        if z.shape[0] != t.size:
            raise ShapeMismatch(f"profile has {z.shape[0]} rows but {t.size} timepoints")
        return cls(t, z, None)


def build_polynomial_profile(timepoints: ArrayLike, degree: int) -> ProfileMatrix:
    """Vandermonde basis whose column ``j`` holds ``t**j`` for ``j = 0..degree``."""
    t = np.asarray(timepoints, dtype=np.float64).ravel()
    if t.size == 0 or not np.all(np.isfinite(t)):
        raise DegenerateTimepoints("timepoints must be a non-empty finite vector")
    if np.unique(t).size != t.size:
        raise DegenerateTimepoints(f"repeated timepoints in {t.tolist()}")
    if degree < 0:
        raise ValueError(f"degree must be non-negative, got {degree}")
    return ProfileMatrix(t, np.vander(t, degree + 1, increasing=True), int(degree))


def build_group_indicator(group_sizes: Sequence[int]) -> list[Matrix]:
    """One ``n x 1`` indicator column per group, groups laid out contiguously."""
    sizes = [int(s) for s in group_sizes]
    if not sizes:
        raise EmptyDesign("at least one group is required")
    if any(s < 1 for s in sizes):
        raise EmptyDesign(f"group sizes must be >= 1, got {sizes}")
    n = sum(sizes)
    out = []
    start = 0
    for s in sizes:
        x = np.zeros((n, 1))
        x[start : start + s, 0] = 1.0
        out.append(x)
        start += s
    return out


@dataclass(frozen=True, eq=False)
class DesignBlock:
    X: Matrix
    Z: ProfileMatrix
    label: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "X", la.as_matrix(self.X, f"X[{self.label}]"))

    @property
    def m(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.Z.q


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A validated additive model. Build it with :func:`validate`."""

    blocks: tuple[DesignBlock, ...]
    n: int
    p: int
    r: int
    timepoints: np.ndarray
    _xtx: tuple[SpdFactor, ...] = field(repr=False)
    _ztz: tuple[SpdFactor, ...] = field(repr=False)

    @property
    def k(self) -> int:
        return len(self.blocks)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(b.m for b in self.blocks)

    @property
    def n_params(self) -> int:
        return sum(b.m * b.q for b in self.blocks)

    def xtx_factor(self, i: int) -> SpdFactor:
        return self._xtx[i]

    def ztz_factor(self, i: int) -> SpdFactor:
        return self._ztz[i]

    def coefficient_shapes(self) -> list[tuple[int, int]]:
        return [(b.m, b.q) for b in self.blocks]

    def check_coefficients(self, coefficients: Sequence[ArrayLike]) -> list[Matrix]:
        if len(coefficients) != self.k:
            raise ShapeMismatch(f"expected {self.k} coefficient matrices, got {len(coefficients)}")
        out = []
        for i, (c, shape) in enumerate(zip(coefficients, self.coefficient_shapes())):
            c = np.asarray(c, dtype=np.float64)
            if c.size != shape[0] * shape[1]:
                raise ShapeMismatch(f"coefficient {i} must have shape {shape}")
            out.append(c.reshape(shape))
        return out

    def mean(self, coefficients: Sequence[ArrayLike]) -> Matrix:
        """``sum_i X_i Theta_i Z_i'``."""
        coefs = self.check_coefficients(coefficients)
        return sum(b.X @ c @ b.Z.matrix.T for b, c in zip(self.blocks, coefs))

    def check_observations(self, y: ArrayLike) -> Matrix:
        y = la.as_matrix(y, "Y")
        if y.shape != (self.n, self.p):
            raise ShapeMismatch(f"Y must be {self.n}x{self.p}, got {y.shape[0]}x{y.shape[1]}")
        return y


def _orthogonality_threshold(xi: Matrix, xj: Matrix, n: int, tol: float) -> float:
    scale = float(np.max(np.abs(xi))) * float(np.max(np.abs(xj))) * n
    return tol * max(1.0, scale)


def validate(blocks: Sequence[DesignBlock], *, tol: float = ORTHOGONALITY_TOL) -> ModelSpec:
    """Check the additive-model conditions and return a :class:`ModelSpec`.

    Requires full column rank for every ``X_i`` and ``Z_i``, pairwise
    orthogonal ``X_i``, shared timepoints, ``q_i <= p`` and
    ``r = n - sum rank(X_i) >= p``.
    """
    blocks = tuple(blocks)
    if not blocks:
        raise EmptyDesign("at least one design block is required")
    n = blocks[0].X.shape[0]
    t0 = blocks[0].Z.timepoints
    p = blocks[0].Z.p
    for idx, b in enumerate(blocks):
        label = b.label or idx
        if b.X.shape[0] != n:
            raise ShapeMismatch(f"block {label!r} has {b.X.shape[0]} rows, expected {n}")
        if b.Z.p != p or b.Z.timepoints.shape != t0.shape or not np.array_equal(b.Z.timepoints, t0):
            raise MixedTimepoints(f"block {label!r} uses different timepoints")
        rank_x = la.matrix_rank(b.X)
        if rank_x < b.m:
            raise RankDeficient(label, rank_x, b.m)
        if b.q > p:
            raise RankDeficient(f"{label}:Z", la.matrix_rank(b.Z.matrix), b.q)
        rank_z = la.matrix_rank(b.Z.matrix)
        if rank_z < b.q:
            raise RankDeficient(f"{label}:Z", rank_z, b.q)
        if rank_x + p > n:
            raise InsufficientResidualDof(n - rank_x, p)
    for i in range(len(blocks)):
        for j in range(i + 1, len(blocks)):
            cross = blocks[i].X.T @ blocks[j].X
            worst = float(np.max(np.abs(cross)))
            if worst > _orthogonality_threshold(blocks[i].X, blocks[j].X, n, tol):
                raise NotOrthogonal(i, j, worst)
    r = n - sum(b.m for b in blocks)
    if r < p:
        raise InsufficientResidualDof(r, p)
    xtx = tuple(la.spd_factor(b.X.T @ b.X) for b in blocks)
    ztz = tuple(la.spd_factor(b.Z.matrix.T @ b.Z.matrix) for b in blocks)
    return ModelSpec(blocks, n, p, r, t0.copy(), xtx, ztz)


def indicator_spec(
    group_sizes: Sequence[int],
    timepoints: ArrayLike,
    degrees: Sequence[int],
    labels: Sequence[str] | None = None,
    *,
    tol: float = ORTHOGONALITY_TOL,
) -> ModelSpec:
    """One block per group: indicator design with its own polynomial degree."""
    xs = build_group_indicator(group_sizes)
    if len(degrees) != len(xs):
        raise ShapeMismatch(f"{len(xs)} groups but {len(degrees)} degrees")
    labels = list(labels) if labels is not None else [f"group{i + 1}" for i in range(len(xs))]
    blocks = [
        DesignBlock(x, build_polynomial_profile(timepoints, d), lab)
        for x, d, lab in zip(xs, degrees, labels)
    ]
    return validate(blocks, tol=tol)
