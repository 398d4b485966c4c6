import math

import numpy as np
import pytest

from ivanov import bounds as b
from ivanov.approximation import interpolation_bound
from ivanov.bounds import BoundParams

SIG6 = dict(rel=5e-7)


def test_expectation_unclipped():
    assert b.bound_expectation_unclipped(BoundParams(sigma=1, n=100), 1, 0) == pytest.approx(7.2)
    assert b.bound_expectation_unclipped(BoundParams(sigma=0, n=4), 1, 1) == pytest.approx(42.0)
    small = b.bound_expectation_unclipped(BoundParams(sigma=1, n=100), 1e-6, 0)
    assert small == pytest.approx(8e-7, rel=1e-4)


def test_expectation_clipped():
    assert b.bound_expectation_clipped(BoundParams(C=1, sigma=0, n=256), 1, 0) == pytest.approx(8.0)
    assert b.bound_expectation_clipped(BoundParams(C=1, sigma=4, n=400), 2, 0) == pytest.approx(16.0)
    assert b.bound_expectation_clipped(BoundParams(n=10**12), 1e-9, 0.5) == pytest.approx(5.0, rel=1e-6)


def test_optimal_radius_clipped():
    p = BoundParams(beta=0.5, B=1, C=1 / 16, sigma=0, n=1)
    assert b.optimal_radius_clipped(p) == pytest.approx(2.5 ** (1 / 3), **SIG6)
    assert b.optimal_radius_clipped(p) == pytest.approx(1.35721, rel=5e-6)
    assert b.optimal_radius_clipped(p.replace(n=64)) == pytest.approx(2.71442, rel=5e-6)
    assert b.optimal_radius_clipped(p.replace(n=64)) > b.optimal_radius_clipped(p)


def test_optimal_radius_minimises_interpolated_bound():
    for beta in (0.2, 0.5, 0.8):
        for n in (10, 1000):
            p = BoundParams(beta=beta, B=1.3, C=1, sigma=0.1, n=n)
            r = b.optimal_radius_clipped(p)
            f = lambda s: b.bound_expectation_clipped(p, s, interpolation_bound(p.B, p.beta, s))
            assert f(r) <= f(0.5 * r) and f(r) <= f(2 * r)
            # rate form equals the bound evaluated at the minimiser
            assert b.clipped_rate_bound(p) == pytest.approx(f(r), rel=1e-10)


def test_highprob_clipped():
    p = BoundParams(C=1, sigma=0, t=1, n=1)
    assert b.bound_highprob_clipped(p, 1, 0) == pytest.approx(208 + 16 / 3, **SIG6)
    assert b.bound_highprob_clipped(p, 1, 1) - b.bound_highprob_clipped(p, 1, 0) == pytest.approx(10)
    p = BoundParams(C=1, sigma=0.3, n=50, t=2)
    q = p.replace(t=4)
    first = lambda pp: b.bound_highprob_clipped(pp, 1, 0) - 16 * pp.t / (3 * pp.n)
    assert first(q) == pytest.approx(math.sqrt(2) * first(p))
    with pytest.raises(ValueError):
        b.bound_highprob_clipped(BoundParams(t=0.5), 1, 0)


def test_validation_expectation():
    p = BoundParams(C=1, sigma_tilde=0, n_tilde=1024, rho=0)
    v = b.bound_validation_expectation(p, 0)
    assert v == pytest.approx(4 * (math.sqrt(2 * math.log(2)) + math.sqrt(math.pi)))
    assert v == pytest.approx(11.7995, rel=5e-6)
    assert b.bound_validation_expectation(p, 1) - v == pytest.approx(10)
    assert b.bound_validation_expectation(p.replace(rho=5), 0) > b.bound_validation_expectation(p.replace(rho=1), 0) > v


def test_validation_highprob():
    p = BoundParams(C=1, sigma_tilde=0, t=1, n_tilde=400, rho=0)
    v = b.bound_validation_highprob(p, 0)
    assert v == pytest.approx(97.808977, **SIG6)
    # the rounded figure 97.8088 is within 2e-6 relative of the exact value
    assert v == pytest.approx(97.8088, rel=2e-6)
    assert b.bound_validation_highprob(p, 1) - v == pytest.approx(10)
    q = p.replace(n_tilde=1600)
    last = lambda pp: 16 * pp.C**2 * pp.t / (3 * pp.n_tilde)
    assert v - last(p) == pytest.approx(2 * (b.bound_validation_highprob(q, 0) - last(q)))
    with pytest.raises(ValueError):
        b.bound_validation_highprob(p.replace(t=0.9), 0)


def test_covering_bound():
    assert b.covering_bound(1, 2, 1) == 3.0
    assert b.covering_bound(1, 0, 0.3) == 1.0
    assert (b.covering_bound(1, 2, 2) - 1) * 4 == pytest.approx(b.covering_bound(1, 2, 1) - 1)
    with pytest.raises(ValueError):
        b.covering_bound(1, 1, 0)


def test_entropy_integral():
    assert b.entropy_integral(1, 0, 1, 1) == pytest.approx(math.sqrt(math.pi / 2))
    assert b.entropy_integral(1, 0, 1, 1) == pytest.approx(1.25331, rel=5e-6)
    assert b.entropy_integral(1, 0, 1, 1, numeric=True) == pytest.approx(0.0, abs=1e-12)
    assert b.entropy_integral(1, 2, 1, 1, numeric=True) <= b.entropy_integral(1, 2, 1, 1)


@pytest.mark.parametrize("rho", np.linspace(0, 8, 5))
@pytest.mark.parametrize("L", np.linspace(0.1, 4, 5))
def test_entropy_numeric_below_closed_form(rho, L):
    for a in (1.0, 3.0):
        assert b.entropy_integral(1.0, rho, 1, L, a, numeric=True) <= b.entropy_integral(1.0, rho, 1, L, a) + 1e-12


def test_monotonicity_spot_checks():
    base = BoundParams(k_inf=1, sigma=0.5, sigma_tilde=0.5, C=1, n=100, n_tilde=100, t=2, rho=3)
    rs = np.linspace(0, 5, 11)
    for f in (lambda p, r: b.bound_expectation_unclipped(p, r, 0.1),
              lambda p, r: b.bound_expectation_clipped(p, r, 0.1),
              lambda p, r: b.bound_highprob_clipped(p, r, 0.1)):
        vals = [f(base, r) for r in rs]
        assert all(y >= x for x, y in zip(vals, vals[1:]))
        assert f(base.replace(n=400), 1) < f(base, 1)
        assert f(base.replace(sigma=1.0), 1) > f(base, 1)
    for f in (b.bound_validation_expectation, b.bound_validation_highprob):
        assert f(base.replace(n_tilde=400), 0.1) < f(base, 0.1)
        assert f(base.replace(sigma_tilde=1.0), 0.1) > f(base, 0.1)
        assert f(base.replace(C=2.0), 0.1) > f(base, 0.1)
    assert b.bound_validation_highprob(base.replace(t=4), 0.1) > b.bound_validation_highprob(base, 0.1)


def test_unclipped_radii_and_constants():
    p = BoundParams(beta=0.5, B=1, k_inf=1, sigma=0.1, n=10**4)
    r = b.optimal_radius_unclipped(p)
    rn = b.optimal_radius_unclipped_numeric(p)
    f = lambda s: b.bound_expectation_unclipped(p, s, interpolation_bound(p.B, p.beta, s))
    assert f(rn) <= f(r) + 1e-12
    D2, D3 = b.unclipped_rate_constants(0.5)
    assert 64 * r**2 / 100 + 10 * interpolation_bound(1, 0.5, r) == pytest.approx(D2 * p.n ** (-0.5 * 0.5), rel=1e-10)
    assert 8 * 0.1 * r / 100 == pytest.approx(D3 * 0.1 * p.n ** (-(1 + 0.5) / 4), rel=1e-10)
    assert b.clipped_rate_constant(0.5) > 0


def test_highprob_radius_and_full_entropy():
    p = BoundParams(beta=0.5, B=1, C=1, sigma=0.2, t=2, n=64)
    assert b.optimal_radius_highprob(p) < b.optimal_radius_highprob(p.replace(n=640))
    assert b.entropy_integral_full(1, 0, 1) == pytest.approx(math.sqrt(2 * math.pi))


def test_params_validation():
    with pytest.raises(ValueError):
        BoundParams(C=0)
    with pytest.raises(ValueError):
        BoundParams(beta=1.0)
    with pytest.raises(ValueError):
        BoundParams(n=0)
