from __future__ import annotations

import math

import numpy as np
import pytest
from conftest import (
    brute_sigma,
    random_response,
    random_spec,
    reparameterize,
    stacked_gls,
)
from hypothesis import given, settings
from hypothesis import strategies as st

from agcm.datasets import dental_dataset, fit_degrees
from agcm.errors import (
    DegenerateCovariance,
    IllConditionedProfile,
    NonpositiveRmss,
    SizeLimit,
)
from agcm.estimation import (
    aic,
    covariance_estimate,
    fit,
    fit_vec_form,
    h_matrix,
    quadratic_covariance,
    rmss,
)
from agcm.model import (
    DesignBlock,
    ProfileMatrix,
    build_polynomial_profile,
    indicator_spec,
    validate,
)

T = (-1.0, -0.5, 0.5, 1.0)


def test_sigma_is_sample_variance():
    spec = validate([DesignBlock(np.ones((3, 1)), ProfileMatrix.from_matrix([0.0], [[1.0]]))])
    cov = quadratic_covariance([[1.0], [2.0], [3.0]], spec)
    assert cov.r == 2
    np.testing.assert_allclose(cov.sigma_hat, [[1.0]], atol=1e-15)


def test_noiseless_data_is_degenerate():
    spec = indicator_spec((10, 10), T, (1, 3))
    y = spec.mean([[[4.0, 2.0]], [[3.0, 2.0, 1.0, -1.0]]])
    with pytest.raises(DegenerateCovariance) as info:
        quadratic_covariance(y, spec)
    assert info.value.exit_code == 3
    with pytest.raises(DegenerateCovariance):
        fit(y, spec)


def test_sigma_matches_brute_force(rng):
    spec = indicator_spec((10, 10), T, (1, 3))
    y = rng.standard_normal((20, 4)) * 3.0 + 5.0
    np.testing.assert_allclose(quadratic_covariance(y, spec).sigma_hat, brute_sigma(y, spec), rtol=0, atol=1e-12)


def test_h_identity_covariance_is_projector():
    z = build_polynomial_profile(T, 1)
    h = h_matrix(covariance_estimate(np.eye(4), 10), z)
    zm = z.matrix
    np.testing.assert_allclose(h, zm @ np.linalg.inv(zm.T @ zm) @ zm.T, atol=1e-14)


def test_h_saturated_profile_is_identity(rng):
    m = rng.standard_normal((4, 4))
    h = h_matrix(covariance_estimate(m @ m.T + np.eye(4), 10), np.eye(4))
    np.testing.assert_allclose(h, np.eye(4), atol=1e-12)


def test_h_two_routes_agree():
    s = np.diag([1.0, 2.0, 3.0, 4.0])
    z = build_polynomial_profile(T, 1).matrix
    si = np.linalg.inv(s)
    explicit = si @ z @ np.linalg.inv(z.T @ si @ z) @ z.T
    h = h_matrix(covariance_estimate(s, 10), z)
    np.testing.assert_allclose(h, explicit, atol=1e-12)
    np.testing.assert_allclose(z.T @ h, z.T, atol=1e-12)
    np.testing.assert_allclose(h @ h, h, atol=1e-12)


def test_h_singular_profile():
    z = np.array([[1.0, 2.0]] * 4)
    with pytest.raises(IllConditionedProfile):
        h_matrix(covariance_estimate(np.eye(4), 10), z)


def test_identity_sigma_gives_ols(rng):
    q, _ = np.linalg.qr(rng.standard_normal((12, 2)))
    x1, x2 = q[:, :1], q[:, 1:]
    spec = validate([DesignBlock(x1, build_polynomial_profile(T, 1)), DesignBlock(x2, build_polynomial_profile(T, 2))])
    y = rng.standard_normal((12, 4))
    res = fit(y, spec, sigma=np.eye(4))
    for b, c in zip(spec.blocks, res.coefficients):
        z = b.Z.matrix
        np.testing.assert_allclose(c, b.X.T @ y @ z @ np.linalg.inv(z.T @ z), atol=1e-12)


def test_dental_linear_fit_near_group_means():
    data = dental_dataset()
    spec, res = fit_degrees(data, (1, 1))
    girls = res.mean_hat[0]
    np.testing.assert_allclose(girls, [21.18, 22.23, 23.09, 24.09], atol=0.1)
    # frozen from the stacked-GLS oracle
    np.testing.assert_allclose(
        girls, [21.236286108445398, 22.189015512916527, 23.141744917387655, 24.094474321858783], rtol=0, atol=1e-10
    )
    np.testing.assert_allclose(res.coefficients[0], [[17.425368490560885, 0.47636470223556415]], atol=1e-10)
    np.testing.assert_allclose(res.coefficients[1], [[15.842289333223254, 0.8268032967095416]], atol=1e-10)
    assert res.rmss == pytest.approx(530.4130975130269, rel=1e-12)
    assert res.aic == pytest.approx(90.4011, abs=5e-5)
    assert res.n_params == 4
    mu, _ = stacked_gls(data.Y, spec, brute_sigma(data.Y, spec))
    np.testing.assert_allclose(res.mean_hat, mu, atol=1e-10)


def test_rmss_and_aic_examples():
    y = np.arange(6.0).reshape(3, 2)
    assert rmss(y, y) == 0.0
    for n in (1, 7, 27, 1000):
        assert aic(float(n), n, 4) == pytest.approx(10.0, abs=1e-9)
    with pytest.raises(NonpositiveRmss):
        aic(0.0, 10, 2)


def test_vec_form_small_instance(rng):
    spec = indicator_spec((5, 5), T, (1, 2))
    y = random_response(rng, spec)
    a, b = fit(y, spec), fit_vec_form(y, spec)
    assert np.max(np.abs(a.mean_hat - b.mean_hat)) <= 1e-8
    for ca, cb in zip(a.coefficients, b.coefficients):
        np.testing.assert_allclose(ca, cb, atol=1e-8)
    for ha, hb in zip(a.h_matrices, b.h_matrices):
        np.testing.assert_allclose(ha, hb, atol=1e-8)


def test_vec_form_saturated_single_block(rng):
    x = np.ones((9, 1))
    spec = validate([DesignBlock(x, ProfileMatrix.from_matrix(T, np.eye(4)))])
    y = rng.standard_normal((9, 4))
    px = x @ x.T / 9
    np.testing.assert_allclose(fit(y, spec).mean_hat, px @ y, atol=1e-12)
    np.testing.assert_allclose(fit_vec_form(y, spec).mean_hat, px @ y, atol=1e-12)


def test_vec_form_size_limit():
    spec = indicator_spec((600, 600), T, (1, 1))
    with pytest.raises(SizeLimit):
        fit_vec_form(np.zeros((1200, 4)), spec)


def test_fit_result_invariants(rng):
    spec = random_spec(rng, k=3)
    y = random_response(rng, spec)
    res = fit(y, spec)
    np.testing.assert_allclose(res.mean_hat, spec.mean(res.coefficients), atol=1e-10)
    assert res.rmss == pytest.approx(np.trace(res.residual.T @ res.residual), rel=1e-12)
    assert res.n_params == sum(b.m * b.q for b in spec.blocks)
    assert res.aic == pytest.approx(aic(res.rmss, spec.n, res.n_params), rel=1e-14)
    s = res.covariance.sigma_hat
    assert np.max(np.abs(s - s.T)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_translation_invariance_of_sigma(seed):
    r = np.random.default_rng(seed)
    spec = random_spec(r)
    y = random_response(r, spec)
    shift = spec.mean([10.0 * r.standard_normal(s) for s in spec.coefficient_shapes()])
    a = quadratic_covariance(y, spec).sigma_hat
    b = quadratic_covariance(y + shift, spec).sigma_hat
    assert np.max(np.abs(a - b)) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_reproducing_identity_and_normal_equations(seed):
    r = np.random.default_rng(seed)
    spec = random_spec(r)
    y = random_response(r, spec)
    res = fit(y, spec)
    for b, h in zip(spec.blocks, res.h_matrices):
        z = b.Z.matrix
        assert np.max(np.abs(z.T @ h - z.T)) <= 1e-8
        ne = b.X.T @ (y - res.mean_hat) @ res.covariance.solve(z)
        assert np.max(np.abs(ne)) <= 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_profile_basis_invariance(seed):
    r = np.random.default_rng(seed)
    spec = random_spec(r)
    y = random_response(r, spec)
    blocks = []
    for b in spec.blocks:
        mix = r.standard_normal((b.q, b.q)) + 2.0 * np.eye(b.q)
        blocks.append(DesignBlock(b.X, reparameterize(b.Z, mix), b.label))
    other = validate(blocks)
    a, c = fit(y, spec), fit(y, other)
    assert np.max(np.abs(a.mean_hat - c.mean_hat)) <= 1e-8
    assert abs(a.rmss - c.rmss) <= 1e-8 * max(1.0, a.rmss)
    assert abs(a.aic - c.aic) <= 1e-8 * max(1.0, abs(a.aic))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fit_matches_stacked_gls_oracle(seed):
    r = np.random.default_rng(seed)
    spec = random_spec(r)
    y = random_response(r, spec)
    res = fit(y, spec)
    mu, coefs = stacked_gls(y, spec, brute_sigma(y, spec))
    assert np.max(np.abs(res.mean_hat - mu)) <= 1e-8
    for c, o in zip(res.coefficients, coefs):
        assert np.max(np.abs(c - o)) <= 1e-7 * max(1.0, np.abs(o).max())
    assert np.max(np.abs(fit_vec_form(y, spec).mean_hat - mu)) <= 1e-8


def test_sigma_override_shape_checked(rng):
    from agcm.errors import ShapeMismatch

    spec = indicator_spec((5, 5), T, (1, 1))
    with pytest.raises(ShapeMismatch):
        fit(rng.standard_normal((10, 4)), spec, sigma=np.eye(3))


def test_aic_log_form():
    assert aic(math.e, 1, 0) == pytest.approx(1.0 + 2.0)
