import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from bsplift import bspline as B
from bsplift.errors import ConfigError
from bsplift.grid import KnotVector


def basis(x, p):
    return B.BSplineBasis(p, KnotVector.from_values(x))


@pytest.fixture(scope="module")
def knots():
    return np.sort(np.random.default_rng(7).uniform(size=17))


@pytest.mark.parametrize("p", range(1, 7))
def test_recursion_matches_scipy(knots, p):
    b = basis(knots, p)
    pts = np.linspace(knots[0], knots[-1], 400, endpoint=False)
    for k in range(b.n):
        np.testing.assert_allclose(B.eval(b, k, pts), oracles.basis_value(knots, p, k, pts), atol=1e-14)


@pytest.mark.parametrize("p", range(1, 7))
def test_local_kernel_matches_recursion(knots, p):
    b = basis(knots, p)
    pts = np.random.default_rng(1).uniform(knots[0], knots[-1], 300)
    full = np.column_stack([B.eval(b, k, pts) for k in range(b.n)])
    np.testing.assert_allclose(B.basis_matrix(b, pts), full, atol=1e-14)


@pytest.mark.parametrize("p", range(1, 7))
def test_partition_of_unity_and_positivity(knots, p):
    b = basis(knots, p)
    # end functions are clamped, so the sum is 1 only on the interior interval
    lo, hi = B.interior_interval(b)
    pts = np.linspace(lo, hi, 500)
    M = B.basis_matrix(b, pts)
    assert M.min() >= -1e-15
    np.testing.assert_allclose(M.sum(axis=1), 1.0, atol=1e-13)


def test_support_is_centred():
    x = np.arange(10.0)
    b = basis(x, 4)
    assert b.support(5) == (3.0, 7.0)
    assert b.support(0) == (0.0, 2.0)
    b3 = basis(x, 3)
    assert b3.support(5) == (4.0, 7.0)


def test_order_one_last_function_is_empty():
    x = np.linspace(0, 1, 6)
    b = basis(x, 1)
    pts = np.linspace(0, 1, 50)
    assert np.all(B.eval(b, 5, pts) == 0.0)
    assert B.eval(b, 4, 1.0) == 1.0


@pytest.mark.parametrize("p", range(2, 7))
def test_derivative_against_central_differences(knots, p):
    b = basis(knots, p)
    # points away from knots so the difference quotient is smooth
    mids = 0.5 * (knots[1:] + knots[:-1])
    h = 1e-6
    for k in range(2, b.n - 2):
        fd = (B.eval(b, k, mids + h) - B.eval(b, k, mids - h)) / (2 * h)
        np.testing.assert_allclose(B.derivative(b, k, mids), fd, atol=2e-5 * max(1, np.abs(fd).max()))


@pytest.mark.parametrize("p", range(1, 7))
def test_power_coefficients_match_marsden(knots, p):
    b = basis(knots, p)
    for q in range(p):
        np.testing.assert_allclose(
            B.power_coefficients(b, q).values, oracles.power_vector(knots, p, q), rtol=1e-12, atol=1e-14
        )


@pytest.mark.parametrize("p", range(1, 7))
def test_power_coefficients_reproduce_monomials_inside(knots, p):
    b = basis(knots, p)
    lo, hi = knots[p - 1], knots[-p]
    pts = np.linspace(lo, hi, 200, endpoint=False)
    for q in range(p):
        np.testing.assert_allclose(B.reconstruct_power(b, B.power_coefficients(b, q), pts), pts**q, atol=1e-12)


def test_power_degree_out_of_range():
    b = basis(np.linspace(0, 1, 8), 3)
    with pytest.raises(ConfigError):
        B.power_coefficients(b, 3)


@pytest.mark.parametrize("p", [1, 2, 4, 5])
def test_moments_match_quadrature(knots, p):
    b = basis(knots, p)
    np.testing.assert_allclose(B.moment_matrix(b, 4), oracles.moment_matrix(knots, p, 4), atol=1e-14)
    np.testing.assert_allclose(B.moments(b, 2).values, oracles.moment_matrix(knots, p, 3)[:, 2], atol=1e-14)


def test_integral_closed_form():
    # integral of an unclamped B-spline is (t_{k+p} - t_k) / p
    x = np.sort(np.random.default_rng(5).uniform(size=20))
    p = 4
    M0 = B.moment_matrix(basis(x, p), 1)[:, 0]
    for k in range(2, 18):
        assert M0[k] == pytest.approx((x[k + 2] - x[k - 2]) / p, rel=1e-13)


def test_eval_rejects_points_outside_and_bad_index():
    b = basis(np.linspace(0, 1, 8), 3)
    with pytest.raises(ConfigError):
        B.eval(b, 0, 1.5)
    with pytest.raises(ConfigError):
        B.eval(b, 8, 0.5)


@given(
    st.lists(st.floats(0, 1, allow_nan=False), min_size=8, max_size=30, unique=True),
    st.integers(1, 6),
    st.floats(0, 1),
)
def test_property_partition_of_unity(vals, p, u):
    x = np.sort(np.array(vals))
    if np.min(np.diff(x)) < 1e-6:
        return
    if x.size < 2 * p:
        return
    b = basis(x, p)
    lo, hi = B.interior_interval(b)
    pt = lo + u * (hi - lo)
    assert B.basis_matrix(b, [pt]).sum() == pytest.approx(1.0, abs=1e-12)
