from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from agcm import linalg as la
from agcm.errors import NotPositiveDefinite, RankDeficient, ValidationError

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@pytest.mark.parametrize(
    "x, expected",
    [
        ([[1.0], [0.0]], [[1, 0], [0, 0]]),
        (np.eye(3), np.eye(3)),
        ([[1.0], [1.0]], [[0.5, 0.5], [0.5, 0.5]]),
    ],
)
def test_projector_examples(x, expected):
    np.testing.assert_allclose(la.projector(x), expected, atol=1e-15)


def test_projector_rank_deficient_names_block():
    with pytest.raises(RankDeficient) as info:
        la.projector([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]], label="girls")
    assert "girls" in str(info.value)
    assert info.value.exit_code == 2


@pytest.mark.parametrize(
    "a, expected",
    [
        (np.diag([2.0, 0.0]), np.diag([0.5, 0.0])),
        (np.eye(4), np.eye(4)),
        ([[1.0, 1.0], [1.0, 1.0]], np.full((2, 2), 0.25)),
    ],
)
def test_pinv_examples(a, expected):
    np.testing.assert_allclose(la.pinv(a), expected, atol=1e-15)


@pytest.mark.parametrize(
    "a, b, expected",
    [
        (2 * np.eye(2), np.eye(2), 0.5 * np.eye(2)),
        (np.eye(3), [[1.0, -2.0], [3.0, 4.0], [5.0, 6.0]], [[1.0, -2.0], [3.0, 4.0], [5.0, 6.0]]),
        ([[4.0, 2.0], [2.0, 3.0]], [[2.0], [3.0]], [[0.0], [1.0]]),
    ],
)
def test_spd_solve_examples(a, b, expected):
    np.testing.assert_allclose(la.spd_solve(a, b), expected, atol=1e-15)


def test_spd_solve_reports_failing_pivot():
    a = np.diag([1.0, 2.0, -1.0])
    with pytest.raises(NotPositiveDefinite) as info:
        la.spd_solve(a, np.eye(3))
    assert info.value.pivot == 2
    assert info.value.exit_code == 3


def test_spd_factor_rejects_asymmetric():
    with pytest.raises(NotPositiveDefinite):
        la.spd_factor([[2.0, 1.0], [0.0, 2.0]])


def test_spd_factor_roundtrip(rng):
    m = rng.standard_normal((5, 5))
    a = m.T @ m + np.eye(5)
    f = la.spd_factor(a)
    assert f.dimension == 5
    assert np.all(np.diag(f.lower) > 0)
    np.testing.assert_allclose(f.reconstruct(), a, atol=1e-12)
    np.testing.assert_allclose(f.inverse() @ a, np.eye(5), atol=1e-10)
    assert f.logdet() == pytest.approx(np.linalg.slogdet(a)[1], rel=1e-12)


def test_kron_and_vec_examples(rng):
    np.testing.assert_array_equal(la.kron(np.eye(2), [[5.0]]), np.diag([5.0, 5.0]))
    np.testing.assert_array_equal(la.vec([[1, 2], [3, 4]]).ravel(), [1, 2, 3, 4])
    a = np.array([[0.0, 1.0], [1.0, 0.0]])
    b, c = rng.standard_normal((2, 2)), rng.standard_normal((2, 2))
    np.testing.assert_allclose(la.vec(a @ b @ c), la.kron(a, c.T) @ la.vec(b), atol=1e-12)


def test_kron_block_layout():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.array([[0.0, 1.0], [1.0, 0.0]])
    k = la.kron(a, b)
    for i in range(2):
        for j in range(2):
            np.testing.assert_array_equal(k[2 * i : 2 * i + 2, 2 * j : 2 * j + 2], a[i, j] * b)


def test_unvec_inverts_vec(rng):
    a = rng.standard_normal((3, 5))
    np.testing.assert_array_equal(la.unvec(la.vec(a), 3, 5), a)


def test_as_matrix_rejects_nonfinite():
    with pytest.raises(ValidationError):
        la.as_matrix([[1.0, np.nan]])


def test_inv_sqrt_sym(rng):
    m = rng.standard_normal((4, 4))
    a = m @ m.T + np.eye(4)
    s = la.inv_sqrt_sym(a)
    np.testing.assert_allclose(s @ a @ s, np.eye(4), atol=1e-10)
    np.testing.assert_allclose(la.sqrt_sym(a) @ la.sqrt_sym(a), a, atol=1e-10)
    assert la.inv_sqrt_sym(np.diag([1.0, 0.0])) is None


@st.composite
def full_rank(draw):
    cols = draw(st.integers(1, 4))
    rows = draw(st.integers(cols, 8))
    x = draw(arrays(np.float64, (rows, cols), elements=finite))
    s = np.linalg.svd(x, compute_uv=False)
    if s[-1] < 1e-3 * max(s[0], 1.0):
        x = x + np.eye(rows, cols)
    return x


@settings(max_examples=150, deadline=None)
@given(full_rank())
def test_projector_properties(x):
    try:
        p = la.projector(x)
    except RankDeficient:
        return
    assert np.max(np.abs(p @ p - p)) <= 1e-10
    assert np.max(np.abs(p - p.T)) <= 1e-12
    np.testing.assert_allclose(p @ x, x, atol=1e-9 * max(1.0, np.abs(x).max()))
    assert np.trace(p) == pytest.approx(x.shape[1], abs=1e-9)


@st.composite
def any_matrix(draw):
    rows, cols = draw(st.integers(1, 6)), draw(st.integers(1, 6))
    rank = draw(st.integers(0, min(rows, cols)))
    seed = draw(st.integers(0, 2**32 - 1))
    r = np.random.default_rng(seed)
    return r.standard_normal((rows, rank)) @ r.standard_normal((rank, cols)) if rank else np.zeros((rows, cols))


@settings(max_examples=200, deadline=None)
@given(any_matrix())
def test_penrose_identities(a):
    g = la.pinv(a)
    scale = max(1.0, np.abs(a).max())
    assert np.max(np.abs(a @ g @ a - a)) <= 1e-10 * scale
    assert np.max(np.abs(g @ a @ g - g)) <= 1e-10 * max(1.0, np.abs(g).max())
    assert np.max(np.abs((a @ g).T - a @ g)) <= 1e-10
    assert np.max(np.abs((g @ a).T - g @ a)) <= 1e-10


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_spd_solve_consistency(p, cols, seed):
    r = np.random.default_rng(seed)
    m = r.standard_normal((p, p))
    a = m.T @ m + np.eye(p)
    b = r.standard_normal((p, cols))
    assert np.max(np.abs(a @ la.spd_solve(a, b) - b)) <= 1e-10 * max(1.0, np.abs(b).max())


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_vec_kron_identity(m, n, p, q, seed):
    r = np.random.default_rng(seed)
    a, b, c = r.standard_normal((m, n)), r.standard_normal((n, p)), r.standard_normal((p, q))
    np.testing.assert_allclose(la.vec(a @ b @ c), la.kron(a, c.T) @ la.vec(b), atol=1e-12)
