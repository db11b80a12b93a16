"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the package's own linear algebra: they
use explicit inverses and the stacked full-GLS formulation so that they fail
independently of the code under test.
"""

from __future__ import annotations

import numpy as np
import pytest

from agcm.model import (
    DesignBlock,
    ModelSpec,
    ProfileMatrix,
    build_polynomial_profile,
    validate,
)


def orthogonal_designs(rng: np.random.Generator, n: int, widths: list[int]) -> list[np.ndarray]:
    """Blocks with mutually orthogonal column spaces but non-orthonormal columns."""
    q, _ = np.linalg.qr(rng.standard_normal((n, sum(widths))))
    out, start = [], 0
    for w in widths:
        mix = rng.standard_normal((w, w)) + 3.0 * np.eye(w)
        out.append(q[:, start : start + w] @ mix)
        start += w
    return out


def random_spec(
    rng: np.random.Generator, *, n: int | None = None, p: int = 4, k: int | None = None
) -> ModelSpec:
    """A random valid model with general (non-indicator) orthogonal designs."""
    k = int(rng.integers(1, 4)) if k is None else k
    widths = [int(rng.integers(1, 3)) for _ in range(k)]
    low = sum(widths) + p
    n = int(rng.integers(max(low, 8), 41)) if n is None else n
    t = np.sort(rng.uniform(-2.0, 2.0, size=p))
    while np.min(np.diff(t)) < 0.2:
        t = np.sort(rng.uniform(-2.0, 2.0, size=p))
    xs = orthogonal_designs(rng, n, widths)
    blocks = [
        DesignBlock(x, build_polynomial_profile(t, int(rng.integers(0, p))), f"b{i}")
        for i, x in enumerate(xs)
    ]
    return validate(blocks)


def random_response(rng: np.random.Generator, spec: ModelSpec, noise: float = 1.0) -> np.ndarray:
    coefs = [rng.normal(size=s) for s in spec.coefficient_shapes()]
    a = rng.standard_normal((spec.p, spec.p))
    return spec.mean(coefs) + noise * rng.standard_normal((spec.n, spec.p)) @ (a + spec.p * np.eye(spec.p))


def brute_sigma(y: np.ndarray, spec: ModelSpec) -> np.ndarray:
    """``Y'(I - sum P_X)Y / r`` with explicit projectors."""
    n = y.shape[0]
    proj = sum(b.X @ np.linalg.inv(b.X.T @ b.X) @ b.X.T for b in spec.blocks)
    return y.T @ (np.eye(n) - proj) @ y / (n - sum(np.linalg.matrix_rank(b.X) for b in spec.blocks))


def stacked_gls(y: np.ndarray, spec: ModelSpec, sigma: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Full GLS on the row-stacked vector with ``Cov(vec E) = I_n kron Sigma``.

    ``vec(X Theta Z') = (X kron Z) vec(Theta)`` for row stacking, so the
    stacked design is ``T = [X_1 kron Z_1, ..., X_k kron Z_k]``.
    """
    n, p = y.shape
    t = np.hstack([np.kron(b.X, b.Z.matrix) for b in spec.blocks])
    omega_inv = np.kron(np.eye(n), np.linalg.inv(sigma))
    theta = np.linalg.solve(t.T @ omega_inv @ t, t.T @ omega_inv @ y.reshape(-1))
    mu = (t @ theta).reshape(n, p)
    coefs, start = [], 0
    for b in spec.blocks:
        size = b.m * b.q
        coefs.append(theta[start : start + size].reshape(b.m, b.q))
        start += size
    return mu, coefs


def reparameterize(z: ProfileMatrix, b: np.ndarray) -> ProfileMatrix:
    return ProfileMatrix.from_matrix(z.timepoints, z.matrix @ b)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
