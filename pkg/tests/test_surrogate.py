import numpy as np
import pytest

from idopt.domain import BoxDomain, FeatureSchema, FixedValue, apply_constraints
from idopt.surrogate import (QuadraticSurrogate, SurrogateFitError, design_matrix, fit,
                             n_coefficients, sample_box)


def random_quadratic(dim, rng, scale=2.0):
    return QuadraticSurrogate(rng.uniform(-scale, scale), rng.uniform(-scale, scale, dim),
                              np.triu(rng.uniform(-scale, scale, (dim, dim))))


def brute_force_eval(s, x):
    # direct double loop over i <= j
    total = s.constant
    for i in range(s.dim):
        total += s.linear[i] * x[i]
        for j in range(i, s.dim):
            total += s.quad[i, j] * x[i] * x[j]
    return total


def test_design_matrix_rows():
    np.testing.assert_array_equal(design_matrix([[2.0]]), [[1, 2, 4]])
    np.testing.assert_array_equal(design_matrix([[1.0, 3.0]]), [[1, 1, 3, 1, 3, 9]])
    assert design_matrix(np.zeros((5, 12))).shape == (5, 91)
    assert n_coefficients(12) == 91


def test_design_matrix_matches_surrogate_vector():
    rng = np.random.default_rng(1)
    s = random_quadratic(4, rng)
    X = rng.normal(size=(7, 4))
    np.testing.assert_allclose(design_matrix(X) @ s.to_vector(), s(X), atol=1e-12)
    np.testing.assert_allclose(s(X), [brute_force_eval(s, x) for x in X], atol=1e-12)


def test_sample_box_degenerate_fixed_value():
    schema = FeatureSchema.numeric(2).with_constraints({1: FixedValue(1.0)})
    d = apply_constraints(BoxDomain([0, 0], [1, 1]), schema)
    X = sample_box(d, schema, 100, np.random.default_rng(0))
    assert np.all(X[:, 1] == 1.0)


def test_sample_box_uniform_moments():
    d = BoxDomain([0, 0], [1, 1])
    X = sample_box(d, FeatureSchema.numeric(2), 10_000, np.random.default_rng(0))
    assert np.all(np.abs(X.mean(axis=0)) < 0.05)
    assert np.all(np.abs(X.var(axis=0) - 1 / 3) < 0.05)


def test_sample_box_shape_and_bounds():
    rng = np.random.default_rng(3)
    d = BoxDomain(rng.normal(size=12), rng.uniform(0.1, 2, 12))
    X = sample_box(d, FeatureSchema.numeric(12), 50, rng)
    assert X.shape == (50, 12)
    assert np.all((X >= d.lower) & (X <= d.upper))


def test_sample_box_deterministic():
    d = BoxDomain([0, 1], [1, 2])
    a = sample_box(d, FeatureSchema.numeric(2), 20, np.random.default_rng(5))
    b = sample_box(d, FeatureSchema.numeric(2), 20, np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("dim", [1, 2, 4])
def test_fit_recovers_known_quadratic(dim):
    rng = np.random.default_rng(dim)
    s = random_quadratic(dim, rng)
    X = rng.uniform(-1, 1, size=(n_coefficients(dim) + 10, dim))
    got = fit(X, s(X), ridge=0.0)
    np.testing.assert_allclose(got.to_vector(), s.to_vector(), atol=1e-8)


def test_fit_constant():
    X = np.random.default_rng(0).uniform(-1, 1, (30, 3))
    got = fit(X, np.full(30, 3.0), ridge=1e-6)
    assert abs(got.constant - 3) < 1e-4
    assert np.all(np.abs(got.to_vector()[1:]) < 1e-4)


def test_fit_underdetermined_interpolates():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, (50, 12))
    y = np.sin(X).sum(axis=1) + rng.normal(size=50)
    got = fit(X, y, ridge=1e-6)
    assert np.max(np.abs(got(X) - y)) < 1e-3


def test_fit_requires_ridge_when_underdetermined():
    X = np.random.default_rng(0).uniform(-1, 1, (5, 3))
    with pytest.raises(SurrogateFitError, match="ridge"):
        fit(X, np.ones(5), ridge=0.0)


def test_fit_beats_constant_predictor():
    rng = np.random.default_rng(2)
    X = rng.uniform(-2, 2, (40, 3))
    y = np.exp(X[:, 0]) + np.abs(X[:, 1])
    s = fit(X, y, ridge=0.0)
    assert np.mean((s(X) - y) ** 2) <= np.mean((y - y.mean()) ** 2)


def test_fit_deterministic_and_row_order_invariant():
    rng = np.random.default_rng(4)
    X = rng.uniform(-1, 1, (30, 3))
    y = rng.normal(size=30)
    a = fit(X, y, 1e-6).to_vector()
    np.testing.assert_array_equal(a, fit(X, y, 1e-6).to_vector())
    perm = rng.permutation(30)
    np.testing.assert_allclose(fit(X[perm], y[perm], 1e-6).to_vector(), a, atol=1e-10)


def test_fit_ridge_leaves_intercept_unshrunk():
    # a huge ridge kills every slope but the intercept still matches the mean
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, (40, 2))
    y = 7.0 + X[:, 0]
    s = fit(X, y, ridge=1e8)
    assert abs(s.constant - y.mean()) < 1e-6
