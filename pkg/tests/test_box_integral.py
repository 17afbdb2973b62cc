import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idopt.box_integral import box_mean, box_mean_grad
from idopt.domain import BoxDomain, SchemaError
from idopt.surrogate import QuadraticSurrogate


def quad(dim, entries=None, constant=0.0, linear=None):
    b = np.zeros((dim, dim))
    for (i, j), v in (entries or {}).items():
        b[i, j] = v
    return QuadraticSurrogate(constant, np.zeros(dim) if linear is None else linear, b)


def central_difference(s, d, step=1e-5):
    """Gradient of box_mean by central differences over (centers, half_lengths)."""
    p = d.params()
    out = np.zeros_like(p)
    for k in range(p.size):
        e = np.zeros_like(p)
        e[k] = step
        out[k] = (box_mean(s, BoxDomain.from_params(p + e))
                  - box_mean(s, BoxDomain.from_params(p - e))) / (2 * step)
    return out


def test_constant_mean():
    assert box_mean(quad(3, constant=2.0), BoxDomain([1, -4, 9], [0.1, 3, 5])) == 2.0


def test_mean_of_square_unit_box():
    assert box_mean(quad(1, {(0, 0): 1.0}), BoxDomain([0], [1])) == pytest.approx(1 / 3)


def test_mean_of_square_shifted_box():
    assert box_mean(quad(1, {(0, 0): 1.0}), BoxDomain([2], [3])) == pytest.approx(7.0)


def test_constant_has_zero_gradient():
    g = box_mean_grad(quad(2, constant=5.0), BoxDomain([1, 2], [1, 1]))
    assert np.all(g.d_center == 0) and np.all(g.d_half == 0)


def test_half_length_gradient_of_negative_square():
    s = quad(1, {(0, 0): -1.0})
    d = BoxDomain([0.0], [3.0])
    g = box_mean_grad(s, d)
    assert g.d_half[0] == pytest.approx(-2.0)
    assert central_difference(s, d)[1] == pytest.approx(-2.0, abs=1e-6)


def test_cross_term_center_gradient():
    s = quad(2, {(0, 1): 2.0})
    d = BoxDomain([0.0, 0.5], [1.0, 1.0])
    g = box_mean_grad(s, d)
    assert g.d_center[0] == pytest.approx(1.0)
    assert central_difference(s, d)[0] == pytest.approx(1.0, abs=1e-6)


def test_nonpositive_half_length_rejected():
    with pytest.raises(SchemaError):
        box_mean(quad(1), BoxDomain([0], [0]))


@st.composite
def surrogate_and_box(draw, max_dim=5):
    dim = draw(st.integers(1, max_dim))
    seed = draw(st.integers(0, 2**31))
    rng = np.random.default_rng(seed)
    s = QuadraticSurrogate(rng.uniform(-2, 2), rng.uniform(-2, 2, dim),
                           np.triu(rng.uniform(-2, 2, (dim, dim))))
    return s, BoxDomain(rng.uniform(-2, 2, dim), rng.uniform(0.1, 2, dim))


@settings(max_examples=200, deadline=None)
@given(surrogate_and_box())
def test_gradient_matches_finite_differences(case):
    s, d = case
    g = box_mean_grad(s, d)
    analytic = np.concatenate([g.d_center, g.d_half])
    fd = central_difference(s, d)
    np.testing.assert_allclose(analytic, fd, rtol=1e-5, atol=1e-7)
    assert g.mean == box_mean(s, d)


@settings(max_examples=30, deadline=None)
@given(surrogate_and_box())
def test_mean_matches_monte_carlo(case):
    s, d = case
    rng = np.random.default_rng(0)
    X = rng.uniform(d.lower, d.upper, size=(100_000, d.size))
    vals = s(X)
    se = vals.std(ddof=1) / np.sqrt(vals.size)
    assert abs(box_mean(s, d) - vals.mean()) <= 3 * se + 1e-12


@settings(max_examples=50, deadline=None)
@given(surrogate_and_box())
def test_no_diagonal_terms_means_sigma_invariance(case):
    s, d = case
    s = QuadraticSurrogate(s.constant, s.linear, s.quad - np.diag(np.diag(s.quad)))
    g = box_mean_grad(s, d)
    assert np.all(g.d_half == 0)
    wider = BoxDomain(d.centers, d.half_lengths * 3)
    assert box_mean(s, wider) == pytest.approx(box_mean(s, d), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(surrogate_and_box(), st.lists(st.floats(-2, 2), min_size=5, max_size=5))
def test_translation_covariance(case, shift):
    # h(x) = g(x - t) re-expanded as a quadratic; its mean on the shifted box equals g's mean
    s, d = case
    t = np.array(shift[:s.dim])
    sym = s.quad + s.quad.T
    linear = s.linear - sym @ t
    constant = s.constant - s.linear @ t + t @ s.quad @ t
    h = QuadraticSurrogate(constant, linear, s.quad)
    moved = BoxDomain(d.centers + t, d.half_lengths)
    assert box_mean(h, moved) == pytest.approx(box_mean(s, d), rel=1e-9, abs=1e-9)
