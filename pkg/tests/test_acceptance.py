"""Acceptance criteria, one test per criterion at its stated tolerance.

Each test records a PASS/FAIL line; the lines are printed in the terminal
summary (see conftest.py). Run on its own with

    pytest tests/test_acceptance.py -v
"""
import time

import numpy as np
import pytest

import oracles
from bsplift import bspline as B
from bsplift import finescale as F
from bsplift import testdata
from bsplift import transform as T
from bsplift import variance as V
from bsplift.grid import KnotVector

pytestmark = pytest.mark.acceptance

RESULTS = {}
SEED = 42
LEVELS = 5


def record(key, ok, detail):
    line = f"criterion {key}: {'PASS' if ok else 'FAIL'} ({detail})"
    RESULTS[key] = line
    print(line)
    return ok


def knot_sets():
    return {
        "equispaced-257": testdata.equispaced_knots(257),
        "equispaced-1000": testdata.equispaced_knots(1000),
        "uniform-257": testdata.uniform_knots(257, SEED),
        "uniform-1000": testdata.uniform_knots(1000, SEED),
    }


@pytest.fixture(scope="module")
def criterion1_transforms():
    out = {}
    t0 = time.perf_counter()
    for name, x in knot_sets().items():
        for order in (1, 2, 3, 4):
            out[name, order] = T.build(T.grid_for(x, LEVELS), order, "vm:p=1")
    return out, time.perf_counter() - t0


def test_1_perfect_reconstruction(criterion1_transforms):
    transforms, build_time = criterion1_transforms
    t0 = time.perf_counter()
    worst = 0.0
    rng = np.random.default_rng(SEED)
    for (name, order), t in transforms.items():
        s = rng.standard_normal(t.n)
        back = T.inverse(t, T.forward(t, s))
        worst = max(worst, np.linalg.norm(back - s) / np.linalg.norm(s))
    runtime = build_time + time.perf_counter() - t0
    ok = worst < 1e-10 and runtime < 5.0
    record("1", ok, f"max relative round-trip error {worst:.2e} < 1e-10, runtime {runtime:.2f} s < 5 s")
    assert worst < 1e-10
    assert runtime < 5.0


def test_2_polynomial_annihilation():
    worst_d = worst_c = 0.0
    for name, x in knot_sets().items():
        for order in (1, 2, 3, 4):
            t = T.build(T.grid_for(x, LEVELS), order, "vm:p=1", boundary="exact")
            fine = B.BSplineBasis(order, t.grid.fine)
            coarse = B.BSplineBasis(order, t.grid.coarse)
            for q in range(order):
                v = B.power_coefficients(fine, q).values
                scale = np.abs(v).max()
                pyr = T.forward(t, v)
                worst_d = max(worst_d, max(np.abs(d).max() for d in pyr.details) / scale)
                want = B.power_coefficients(coarse, q).values
                worst_c = max(worst_c, np.abs(pyr.coarse - want).max() / np.abs(want).max())
    ok = worst_d < 1e-9 and worst_c < 1e-9
    record("2", ok, f"max detail / scale {worst_d:.2e}, coarse relative error {worst_c:.2e}, both < 1e-9")
    assert worst_d < 1e-9
    assert worst_c < 1e-9


def test_3_refinement_equation(criterion1_transforms):
    transforms, _ = criterion1_transforms
    worst = worst_oracle = 0.0
    for (name, order), t in transforms.items():
        if not name.endswith("257"):
            continue
        for lev in t.levels:
            fine = t.grid.level(lev.j + 1).knots
            coarse = t.grid.level(lev.j).knots
            bf = B.BSplineBasis(order, KnotVector(fine))
            bc = B.BSplineBasis(order, KnotVector(coarse))
            # interior: every function alive there has unclamped knots on both levels
            lo, hi = coarse[order], coarse[-order - 1]
            pts = np.linspace(lo, hi, 500)
            Pf = np.column_stack([B.eval(bf, k, pts) for k in range(bf.n)])
            Pc = np.column_stack([B.eval(bc, k, pts) for k in range(bc.n)])
            H = lev.H.toarray()
            worst = max(worst, np.abs(Pc - Pf @ H).max())
            if lev.j == t.J - 1:
                Of = oracles.basis_columns(fine, order, pts[:-1])
                Oc = oracles.basis_columns(coarse, order, pts[:-1])
                worst_oracle = max(worst_oracle, np.abs(Oc - Of @ H).max())
    ok = worst < 1e-9 and worst_oracle < 1e-9
    record("3", ok, f"max refinement residual {worst:.2e} (scipy basis {worst_oracle:.2e}) < 1e-9")
    assert worst < 1e-9
    assert worst_oracle < 1e-9


def test_4_equispaced_reduction():
    cases = {2: [0.5, 1.0, 0.5], 4: [0.125, 0.5, 0.75, 0.5, 0.125]}
    worst = worst_oracle = 0.0
    for order, want in cases.items():
        want = np.array(want)
        h = order // 2
        x = testdata.equispaced_knots(257)
        t = T.build(T.grid_for(x, LEVELS), order, "vm:p=1")
        for lev in t.levels:
            H = lev.H.toarray()
            nc = H.shape[1]
            for k in range(order + 1, nc - order - 1):
                col = H[:, k]
                band = col[2 * k - h : 2 * k - h + want.size]
                rest = np.delete(col, np.arange(2 * k - h, 2 * k - h + want.size))
                worst = max(worst, np.abs(band - want).max(), np.abs(rest).max())
        # brute-force power-coefficient solve on a 12-knot grid
        xs = np.arange(12) / 11.0
        small = T.build(T.grid_for(xs, 1), order, "vm:p=1").level(0).H.toarray()
        rows = oracles.refinement_rows_by_power(xs, xs[::2], order, range(2 * 2 - h, 2 * 3 - h + want.size))
        for k in (2, 3):
            for i in range(2 * k - h, 2 * k - h + want.size):
                worst_oracle = max(worst_oracle, abs(rows[i][k] - want[i - 2 * k + h]), abs(small[i, k] - rows[i][k]))
    ok = worst < 1e-12 and worst_oracle < 1e-12
    record("4", ok, f"interior column error {worst:.2e}, power-solve oracle {worst_oracle:.2e}, both < 1e-12")
    assert worst < 1e-12
    assert worst_oracle < 1e-12


@pytest.fixture(scope="module")
def equispaced_2048():
    return T.grid_for(testdata.equispaced_knots(2048), LEVELS)


@pytest.mark.slow
@pytest.mark.xfail(
    strict=True,
    reason="the clamped-boundary cubic transform has condition number 96.2; the 71.9 target "
    "is not reproduced (see the decision ledger)",
)
def test_5a_condition_number_cubic_bspline(equispaced_2048):
    t0 = time.perf_counter()
    t = T.build(equispaced_2048, 4, "vm:p=2,nu=2")
    kappa = V.condition_number(t)
    runtime = time.perf_counter() - t0
    ok = abs(kappa - 71.9) <= 0.10 * 71.9 and runtime < 60
    record("5a", ok, f"cubic B-spline condition number {kappa:.2f}, target 71.9 +-10%, runtime {runtime:.1f} s")
    assert runtime < 60
    assert abs(kappa - 71.9) <= 0.10 * 71.9


@pytest.mark.slow
def test_5b_condition_number_deslauriers_dubuc(equispaced_2048):
    t0 = time.perf_counter()
    t = T.design_deslauriers_dubuc(equispaced_2048, 4, "vm:p=2,nu=2")
    kappa = V.condition_number(t)
    runtime = time.perf_counter() - t0
    ok = abs(kappa - 203.7) <= 0.15 * 203.7 and runtime < 60
    record("5b", ok, f"cubic Deslauriers-Dubuc condition number {kappa:.2f}, target 203.7 +-15%, runtime {runtime:.1f} s")
    assert runtime < 60
    assert abs(kappa - 203.7) <= 0.15 * 203.7


@pytest.fixture(scope="module")
def projection_reports():
    x = testdata.uniform_knots(1000, SEED)
    grid = T.grid_for(x, LEVELS)
    modes = {"vm44": "vm:p=4,nu=4", "opt02": "opt:p=0,nu=2", "opt04": "opt:p=0,nu=4", "opt24": "opt:p=2,nu=4"}
    return {k: V.analyze(T.build(grid, 4, m)) for k, m in modes.items()}


def test_6_projection_properties(projection_reports):
    reps = projection_reports
    ranks = {k: r.rank for k, r in reps.items()}
    n_L = {k: r.n_L for k, r in reps.items()}
    orth = max(np.abs(r.orthogonal_singular_values - 1).max() for r in reps.values())
    low = min(r.singular_values[r.rank - 1] for r in reps.values())
    k2 = {k: r.kappa_2 for k, r in reps.items()}
    checks = {
        "a": all(v == 32 for v in ranks.values()) and all(v == 32 for v in n_L.values()),
        "b": orth <= 1e-6,
        "c": low >= 1 - 1e-8,
        "d": 4 <= k2["opt02"] <= 16,
        "e": k2["opt04"] <= k2["opt24"] + 1e-8 and k2["opt24"] <= k2["vm44"] + 1e-8,
    }
    detail = (
        f"rank {sorted(set(ranks.values()))}, orthogonal deviation {orth:.1e}, min nonzero sv {low:.6f}, "
        f"bidiagonal kappa2 {k2['opt02']:.3f}, ordering {k2['opt04']:.3f} <= {k2['opt24']:.3f} <= {k2['vm44']:.3f}"
    )
    record("6", all(checks.values()), detail)
    assert checks == dict.fromkeys("abcde", True)


def test_7_vanishing_moments():
    worst = 0.0
    x = testdata.uniform_knots(1000, SEED)
    grid = T.grid_for(x, LEVELS)
    for p in (1, 2, 3, 4):
        t = T.build(grid, 4, f"vm:p={p}")
        for lev in t.levels:
            assert not lev.info["deficits"]
        for O in T.wavelet_moments(t, p):
            worst = max(worst, np.abs(O[:, :p]).max())
    ok = worst < 1e-8
    record("7", ok, f"max |wavelet moment| {worst:.2e} < 1e-8 for p = 1..4")
    assert worst < 1e-8


def test_8_presmoother():
    x = testdata.uniform_knots(1000, SEED)
    kv = KnotVector.from_values(x)
    worst_rep = worst_sum = 0.0
    for order in (1, 2, 3, 4):
        P = F.build_presmoother(kv, order)
        S = P.dense()
        # raw coordinates against the closed-form power coefficients
        ext = P.extended.knots
        for q in range(order):
            want = oracles.power_vector(ext, order, q)
            worst_rep = max(worst_rep, np.abs(S @ x**q - want).max())
        worst_rep = max(worst_rep, F.constraint_residual(P))
        worst_sum = max(worst_sum, np.abs(S.sum(axis=1) - 1).max())
    # presmooth a sampled cubic, then transform on the extended knots
    P = F.build_presmoother(kv, 4)
    f = 2.0 - x + 3.0 * x**2 - 4.0 * x**3
    c = F.apply_presmoother(P, f)
    t = T.build(T.grid_for(P.extended, LEVELS), 4, "vm:p=1", boundary="exact")
    pyr = T.forward(t, c)
    worst_d = max(np.abs(d).max() for d in pyr.details) / np.abs(f).max()
    ok = worst_rep < 1e-10 and worst_sum < 1e-12 and worst_d < 1e-8
    record(
        "8", ok,
        f"reproduction {worst_rep:.2e} < 1e-10, row sums {worst_sum:.2e} < 1e-12, pipeline details / scale {worst_d:.2e} < 1e-8",
    )
    assert worst_rep < 1e-10
    assert worst_sum < 1e-12
    assert worst_d < 1e-8


def test_9_nondecimated_consistency():
    x = testdata.uniform_knots(1000, SEED)
    t = T.build(T.grid_for(x, LEVELS), 4, "vm:p=2")
    y = testdata.noisy_signal(x, 0.1, SEED + 1)
    nd = T.forward_nondecimated(t, y)
    dec = T.forward(t, y)
    same = all(np.array_equal(nd.channel(j, 0)[1], dec.detail(j)) for j in range(t.L, t.J))
    same = same and np.array_equal(nd.channel(t.L, 0)[0], dec.coarse)
    counts = nd.counts()
    ok = same and counts == [t.n] * LEVELS
    record("9", ok, f"channel 0 identical to the decimated pyramid: {same}; counts per level {sorted(set(counts))} = n_J {t.n}")
    assert same
    assert counts == [t.n] * LEVELS


def test_10_denoising():
    x = testdata.uniform_knots(1000, SEED)
    f = testdata.piecewise_smooth(x)
    t = T.build(T.grid_for(x, LEVELS), 4, "opt:p=2,nu=4")
    wins = 0
    mse_in, mse_out = [], []
    for r in range(20):
        y = f + 0.1 * np.random.default_rng(SEED + r).standard_normal(x.size)
        z = T.denoise(t, y)
        mse_in.append(np.mean((y - f) ** 2))
        mse_out.append(np.mean((z - f) ** 2))
        wins += mse_out[-1] < mse_in[-1]
    ok = wins >= 19
    record("10", ok, f"{wins}/20 replicates improved; mean MSE {np.mean(mse_in):.4f} -> {np.mean(mse_out):.4f}")
    assert wins >= 19


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v"]))
