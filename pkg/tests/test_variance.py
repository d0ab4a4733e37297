import numpy as np
import pytest

from bsplift import transform as T
from bsplift import variance as V
from bsplift.errors import ConfigError


@pytest.fixture(scope="module", params=["vm:p=2", "opt:p=2,nu=4", "opt:p=0,nu=2"])
def t(request):
    x = np.sort(np.random.default_rng(42).uniform(size=161))
    return T.build(T.grid_for(x, 3), 4, request.param)


def test_projection_is_idempotent(t):
    P = V.projection_matrix(t)
    np.testing.assert_allclose(P @ P, P, atol=1e-9 * np.abs(P).max())
    assert np.linalg.matrix_rank(P) == t.grid.n(t.L)


def test_singular_values_match_lapack(t):
    rep = V.analyze(t)
    P = V.projection_matrix(t)
    s = np.linalg.svd(P, compute_uv=False)
    np.testing.assert_allclose(rep.singular_values[: rep.n_L], s[: rep.n_L], rtol=1e-10)
    assert rep.kappa_2 == pytest.approx(s[0], rel=1e-10)
    assert rep.kappa_F == pytest.approx(np.linalg.norm(P) / np.sqrt(rep.n_L), rel=1e-10)
    assert rep.rank == rep.n_L


def test_projection_bounds(t):
    rep = V.analyze(t)
    # an oblique projection has no singular value below one
    assert rep.singular_values[rep.rank - 1] >= 1 - 1e-8
    np.testing.assert_allclose(rep.orthogonal_singular_values, 1.0, atol=1e-8)
    assert rep.variance_margin >= -1e-10


def test_report_as_dict(t):
    d = V.analyze(t).as_dict()
    assert {"kappaF", "kappa2", "rank", "n_L", "singular_values", "levels"} <= set(d)
    assert len(d["levels"]) == t.J - t.L


def test_intermediate_level(t):
    rep = V.analyze(t, t.J - 1)
    assert rep.n_L == t.grid.n(t.J - 1)
    with pytest.raises(ConfigError):
        V.analyze(t, t.J)


def test_condition_number_matches_numpy(t):
    assert V.condition_number(t) == pytest.approx(np.linalg.cond(t.analysis_matrix()), rel=1e-10)


def test_optimised_levels_are_reproduced():
    x = np.sort(np.random.default_rng(42).uniform(size=161))
    t = T.build(T.grid_for(x, 3), 4, "opt:p=2,nu=4")
    for j in range(t.L, t.J):
        U, info = V.optimize_final_update(t, j, 2, 4)
        np.testing.assert_allclose(U.toarray(), t.level(j).update.toarray(), atol=1e-12)
        assert info["stationarity_residual"] < 1e-10


def test_optimum_beats_vanishing_moment_update():
    # with the same pattern and moments, the optimum cannot have larger Frobenius norm
    x = np.sort(np.random.default_rng(42).uniform(size=161))
    g = T.grid_for(x, 1)
    vm = V.analyze(T.build(g, 4, "vm:p=2,nu=4"))
    opt = V.analyze(T.build(g, 4, "opt:p=2,nu=4"))
    assert opt.kappa_F <= vm.kappa_F + 1e-12
