import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _problems import random_problem, random_points
from ivanov.core import clip, fit, predict_many
from ivanov.kernels import KernelSpec
from ivanov.validation import build_grid, grid_from_radii, select_radius, validation_risk

G1 = KernelSpec.gaussian(1.0)


def test_build_grid_examples():
    g = build_grid(1, 1, 4)
    assert g.radii.tolist() == [0.0, 1.0, 2.0] and g.rho == 2.0
    g = build_grid(1, 0.5, 1)
    assert g.radii.tolist() == [0.0, 0.5, 1.0] and g.rho == 1.0
    g = build_grid(2, 3, 1)
    assert g.radii.tolist() == [0.0, 2.0] and g.rho == 2.0
    with pytest.raises(ValueError):
        build_grid(0, 1, 4)
    with pytest.raises(ValueError):
        build_grid(1, -1, 4)


def test_grid_size_matches_ceiling():
    for a, b, n in [(1, 0.25, 32), (0.7, 0.3, 50), (1, 1, 9)]:
        g = build_grid(a, b, n)
        I = int(np.ceil(a * np.sqrt(n) / b))
        assert np.all(np.diff(g.radii) > 0)
        assert g.radii[-1] == pytest.approx(a * np.sqrt(n))
        assert len(g) in (I, I + 1)


def test_validation_risk_examples():
    assert validation_risk(lambda x: np.zeros(len(x)), [0.1, 0.2], [1.0, -1.0]) == 1.0
    yv = np.array([0.3, -0.4])
    assert validation_risk(lambda x: yv, [0.1, 0.2], yv, C=1.0) == 0.0
    f = fit(G1, [0.0], [2.0], 1.0)
    assert validation_risk(f, [0.0], [0.0], C=1.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        validation_risk(f, [], [], C=1.0)


def test_select_radius_examples():
    rng = np.random.default_rng(0)
    xs, Y = rng.random(5), rng.standard_normal(5)
    xv, yv = rng.random(4), rng.standard_normal(4)
    assert select_radius(G1, (xs, Y), (xv, yv), grid_from_radii([1.0]), 1.0).selected_radius == 1.0

    # three grid radii, risks 4, 1, 0 by the closed forms
    res = select_radius(G1, ([0.0], [2.0]), ([0.0], [2.0]), grid_from_radii([0, 1, 2]), 2.0)
    assert res.selected_radius == 2.0
    assert [v for _, v in res.validation_risks] == pytest.approx([4.0, 1.0, 0.0], abs=1e-9)


def test_saturation_tie_break():
    p = random_problem(np.random.default_rng(4), n_max=12)
    val = (random_points(p.spec, np.random.default_rng(5), 6), np.zeros(6) + 0.1)
    r1, r2 = 1.5 * p.rstar + 1, 3 * p.rstar + 2
    res = select_radius(p.spec, (p.xs, p.Y), val, grid_from_radii([r1, r2]), 10.0)
    assert res.selected_radius == r1


def test_empty_validation_raises():
    with pytest.raises(ValueError):
        select_radius(G1, ([0.0], [1.0]), ([], []), grid_from_radii([1.0]), 1.0)
    with pytest.raises(ValueError):
        select_radius(G1, ([0.0], [1.0]), ([0.0], [1.0]), grid_from_radii([1.0]), 0.0)


def _instance(seed):
    rng = np.random.default_rng(seed)
    p = random_problem(rng, n_max=40)
    nv = int(rng.integers(1, 30))
    xv = random_points(p.spec, rng, nv)
    yv = np.clip(rng.standard_normal(nv), -1.5, 1.5)
    grid = build_grid(rng.uniform(0.2, 2), rng.uniform(0.05, 1), p.n)
    return rng, p, (xv, yv), grid


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_exhaustive_minimum_and_refinement(seed):
    rng, p, val, grid = _instance(seed)
    C = 1.5
    res = select_radius(p.spec, (p.xs, p.Y), val, grid, C, decomp=p.decomp, K=p.K)
    risks = dict(res.validation_risks)
    best = min(risks.values())
    assert risks[res.selected_radius] == best
    assert all(r >= res.selected_radius for r, v in risks.items() if v == best)
    # independent recomputation through fit()
    for r in grid.radii[:: max(1, len(grid.radii) // 5)]:
        f = fit(p.spec, p.xs, p.Y, r, decomp=p.decomp, K=p.K)
        assert validation_risk(f, *val, C=C) == pytest.approx(risks[r], rel=1e-6, abs=1e-9)
    # clipping never hurts when |y| <= C
    f = res.fit
    raw = float(np.mean((predict_many(f, val[0]) - val[1]) ** 2))
    assert validation_risk(f, *val, C=C) <= raw + 1e-12
    # adding radii never raises the minimum
    finer = grid_from_radii(np.concatenate([grid.radii, rng.uniform(0, grid.rho, 5)]))
    res2 = select_radius(p.spec, (p.xs, p.Y), val, finer, C, decomp=p.decomp, K=p.K)
    assert min(v for _, v in res2.validation_risks) <= best + 1e-12 * (1 + best)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_duplicate_saturated_radius_keeps_choice(seed):
    rng, p, val, grid = _instance(seed)
    res = select_radius(p.spec, (p.xs, p.Y), val, grid, 1.5, decomp=p.decomp, K=p.K)
    top = max(grid.radii[-1], p.rstar) * 2 + 1
    base = grid_from_radii(np.append(grid.radii, top))
    more = grid_from_radii(np.append(base.radii, 2 * top))
    a = select_radius(p.spec, (p.xs, p.Y), val, base, 1.5, decomp=p.decomp, K=p.K)
    b = select_radius(p.spec, (p.xs, p.Y), val, more, 1.5, decomp=p.decomp, K=p.K)
    assert a.selected_radius == b.selected_radius
    assert res.selected_radius <= a.selected_radius or a.selected_radius == top


def test_adaptive_fit_predictions_are_clipped():
    res = select_radius(G1, ([0.0], [5.0]), ([0.0], [5.0]), grid_from_radii([0, 10]), 2.0)
    assert res([0.0]).tolist() == [2.0]
    assert clip(5.0, 2.0) == 2.0
