import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_cubature.cubature import (
    DimensionMismatch,
    InvalidDimension,
    cubature_transform,
    generate_cubature_points,
)
from robust_cubature.scenarios import random_spd


def test_points_n1():
    cs = generate_cubature_points(1)
    np.testing.assert_array_equal(cs.points.ravel(), [1.0, -1.0])
    np.testing.assert_array_equal(cs.weights, [0.5, 0.5])


def test_points_n2_column_order():
    cs = generate_cubature_points(2)
    r = np.sqrt(2)
    np.testing.assert_allclose(cs.points, [[r, 0], [0, r], [-r, 0], [0, -r]])
    np.testing.assert_array_equal(cs.weights, [0.25] * 4)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 7, 10])
def test_basic_set_moments(n):
    cs = generate_cubature_points(n)
    assert cs.points.shape == (2 * n, n)
    assert cs.weights.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(cs.weights @ cs.points, 0.0, atol=1e-15)
    np.testing.assert_allclose((cs.weights[:, None] * cs.points).T @ cs.points, np.eye(n), atol=1e-14)


def test_zero_dimension_rejected():
    with pytest.raises(InvalidDimension):
        generate_cubature_points(0)


def test_identity_map_exact():
    rng = np.random.default_rng(0)
    mean, cov = rng.standard_normal(3), random_spd(rng, 3)
    tr = cubature_transform(mean, cov, lambda x: x)
    np.testing.assert_allclose(tr.mean, mean, atol=1e-14)
    np.testing.assert_allclose(tr.cov, cov, rtol=1e-12)
    np.testing.assert_allclose(tr.cross_cov, cov, rtol=1e-12)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 5), m=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
def test_affine_map_matches_closed_form(n, m, seed):
    rng = np.random.default_rng(seed)
    A, b = rng.standard_normal((m, n)), rng.standard_normal(m)
    mean, cov = rng.standard_normal(n), random_spd(rng, n)
    tr = cubature_transform(mean, cov, lambda X: X @ A.T + b, vectorized=True)
    scale = 1.0 + np.abs(A @ cov @ A.T).max()
    np.testing.assert_allclose(tr.mean, A @ mean + b, atol=1e-10 * (1 + np.abs(A @ mean + b).max()))
    np.testing.assert_allclose(tr.cov, A @ cov @ A.T, atol=1e-10 * scale)
    np.testing.assert_allclose(tr.cross_cov, cov @ A.T, atol=1e-10 * scale)


def test_square_map_two_point_rule():
    tr = cubature_transform(np.zeros(1), np.eye(1), lambda x: x**2)
    np.testing.assert_allclose(tr.mean, [1.0])
    np.testing.assert_allclose(tr.cov, [[0.0]])
    np.testing.assert_allclose(tr.cross_cov, [[0.0]])


def test_vectorized_and_pointwise_agree():
    rng = np.random.default_rng(3)
    mean, cov = rng.standard_normal(2), random_spd(rng, 2)
    g = lambda x: np.stack([np.sin(x[..., 0]), x[..., 0] * x[..., 1]], axis=-1)
    a = cubature_transform(mean, cov, g)
    b = cubature_transform(mean, cov, g, vectorized=True)
    np.testing.assert_allclose(a.mean, b.mean, rtol=1e-14)
    np.testing.assert_allclose(a.cov, b.cov, rtol=1e-13)


def test_translation_equivariance():
    rng = np.random.default_rng(5)
    mean, cov, c = rng.standard_normal(2), random_spd(rng, 2), rng.standard_normal(2)
    g = lambda x: np.stack([np.cos(x[..., 0]) + x[..., 1] ** 2], axis=-1)
    a = cubature_transform(mean, cov, g, vectorized=True)
    b = cubature_transform(mean + c, cov, lambda x: g(x - c), vectorized=True)
    np.testing.assert_allclose(a.mean, b.mean, atol=1e-12)
    np.testing.assert_allclose(a.cov, b.cov, atol=1e-12)
    np.testing.assert_allclose(a.cross_cov, b.cross_cov, atol=1e-12)


def test_output_cov_symmetric_psd():
    rng = np.random.default_rng(9)
    mean, cov = rng.standard_normal(3), random_spd(rng, 3)
    tr = cubature_transform(mean, cov, lambda x: np.array([x[0] * x[1], np.exp(x[2]), x[0]]))
    np.testing.assert_array_equal(tr.cov, tr.cov.T)
    assert np.linalg.eigvalsh(tr.cov).min() > -1e-12


def test_inconsistent_output_dimension():
    calls = iter(range(100))
    g = lambda x: np.zeros(1 + next(calls) % 2)
    with pytest.raises(DimensionMismatch):
        cubature_transform(np.zeros(2), np.eye(2), g)


def test_cov_mean_mismatch():
    with pytest.raises(DimensionMismatch):
        cubature_transform(np.zeros(2), np.eye(3), lambda x: x)
