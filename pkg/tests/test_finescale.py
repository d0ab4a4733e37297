import numpy as np
import pytest

import oracles
from bsplift import bspline as B
from bsplift import finescale as F
from bsplift.errors import ConfigError
from bsplift.grid import KnotVector


def knots(n=30, seed=42):
    return np.sort(np.random.default_rng(seed).uniform(size=n))


def window(k, n, nb):
    lo = min(max(k - 1 - (nb - 1) // 2, 0), n - nb)
    return np.arange(lo, lo + nb)


def oracle_rows(x, order, nb):
    """Rows of S in raw coordinates: square solve when nb == order,
    null-space least squares otherwise."""
    n = x.size
    ext = np.concatenate([[2 * x[0] - x[1]], x, [2 * x[-1] - x[-2]]])
    Xt = np.column_stack([oracles.power_vector(ext, order, q) for q in range(order)])
    S = np.zeros((n + 2, n))
    for k in range(n + 2):
        cols = window(k, n, nb)
        V = x[cols][:, None] ** np.arange(order)[None, :]
        if nb == order:
            S[k, cols] = np.linalg.solve(V.T, Xt[k])
        else:
            e = (cols == k - 1).astype(float)
            S[k, cols] = oracles.kkt_by_nullspace(np.eye(nb), e, V.T, Xt[k])
    return S


def test_extension_mirrors_end_gaps():
    kv = KnotVector.from_values([0.0, 0.1, 0.5, 1.0])
    e = F.extend_knots(kv)
    np.testing.assert_allclose(e.knots, [-0.1, 0.0, 0.1, 0.5, 1.0, 1.5])


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_square_case_matches_direct_solve(order):
    x = knots()
    P = F.build_presmoother(x, order, neighborhood=order)
    np.testing.assert_allclose(P.dense(), oracle_rows(x, order, order), atol=1e-9)


@pytest.mark.parametrize("order", [2, 3, 4])
@pytest.mark.parametrize("extra", [1, 2, 4])
def test_least_squares_rows_match_nullspace_oracle(order, extra):
    x = knots()
    P = F.build_presmoother(x, order, neighborhood=order + extra)
    np.testing.assert_allclose(P.dense(), oracle_rows(x, order, order + extra), atol=1e-9)
    assert P.residuals.max() < 1e-10


@pytest.mark.parametrize("order", range(1, 6))
def test_shape_reproduction_and_row_sums(order):
    x = knots(60)
    P = F.build_presmoother(x, order)
    assert P.S.shape == (62, 60)
    assert P.neighborhood == order + 2
    assert F.constraint_residual(P) < 1e-10
    np.testing.assert_allclose(P.dense().sum(axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("order", [2, 3, 4])
def test_polynomial_samples_give_the_spline_of_the_polynomial(order):
    x = knots(40)
    P = F.build_presmoother(x, order)
    coef = np.random.default_rng(order).standard_normal(order)
    f = np.polynomial.polynomial.polyval(x, coef)
    c = F.apply_presmoother(P, f)
    basis = B.BSplineBasis(order, P.extended)
    lo, hi = B.interior_interval(basis)
    pts = np.linspace(lo, hi, 100)
    np.testing.assert_allclose(B.basis_matrix(basis, pts) @ c, np.polynomial.polynomial.polyval(pts, coef), atol=1e-10)


def test_rows_stay_near_identity():
    x = np.linspace(0, 1, 50)
    P = F.build_presmoother(x, 2)
    D = P.dense()
    # linear splines interpolate: interior rows are exactly the identity
    for k in range(2, 49):
        np.testing.assert_allclose(D[k], np.eye(50)[k - 1], atol=1e-12)


def test_variances_are_row_norms():
    P = F.build_presmoother(knots(), 4)
    D = P.dense()
    np.testing.assert_allclose(P.variances(), (D**2).sum(axis=1))
    assert np.all(P.variances() > 0)


def test_argument_checks():
    x = knots(10)
    with pytest.raises(ConfigError):
        F.build_presmoother(x, 4, neighborhood=3)
    with pytest.raises(ConfigError):
        F.build_presmoother(x, 4, neighborhood=11)
    with pytest.raises(ConfigError):
        F.build_presmoother(x, 0)
    P = F.build_presmoother(x, 2)
    with pytest.raises(ConfigError):
        F.apply_presmoother(P, np.ones(9))
