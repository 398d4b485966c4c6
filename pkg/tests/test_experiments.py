import math
from dataclasses import replace

import numpy as np
import pytest

from ivanov.approximation import DiscreteDesign
from ivanov.errors import ConfigError
from ivanov.experiments import (ScenarioConfig, _noise, fit_slope, generate, make_truth,
                                mc_sq_error, run_rate_experiment, stream)
from ivanov.kernels import Box, KernelSpec

BROWNIAN = ScenarioConfig(kernel=KernelSpec.brownian(), truth="brownian_tent", sigma=0.1,
                          replications=2, mc_points=2000, seed=7)


def test_generate_deterministic():
    a, b = generate(BROWNIAN, 3), generate(BROWNIAN, 3)
    for f in ("train_x", "train_y", "val_x", "val_y"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
    c = generate(BROWNIAN, 4)
    assert not np.array_equal(a.train_x, c.train_x)
    assert not np.array_equal(a.train_x, a.val_x)
    assert len(a.train_y) == 32 and len(a.val_y) == 32


def test_noiseless_responses():
    d = generate(replace(BROWNIAN, sigma=0.0), 0)
    assert np.array_equal(d.train_y, np.minimum(d.train_x[:, 0], 0.5))
    assert np.array_equal(d.val_y, np.minimum(d.val_x[:, 0], 0.5))


def test_uniform_noise_variance():
    cfg = replace(BROWNIAN, noise="uniform", sigma=0.3)
    e = _noise(cfg, stream(1), 100000)
    assert abs(e.var() / 0.09 - 1) <= 0.03
    assert np.max(np.abs(e)) <= 0.3 * math.sqrt(3)


def test_mc_sq_error_examples():
    law = BROWNIAN.covariate_law
    g = make_truth(BROWNIAN.kernel, "identity")
    assert mc_sq_error(g, g, law, 100, 0) == (0.0, 0.0)
    one = lambda x: np.ones(len(x))
    zero = lambda x: np.zeros(len(x))
    m, se = mc_sq_error(zero, one, law, 1000, 0)
    assert m == 1.0 and se == 0.0
    m, se = mc_sq_error(zero, g, law, 100000, 0)
    assert abs(m - 1 / 3) <= 3 * se
    with pytest.raises(ValueError):
        mc_sq_error(zero, g, law, 1, 0)


def test_unknown_truth():
    with pytest.raises(ConfigError):
        make_truth(BROWNIAN.kernel, "nope")
    with pytest.raises(ConfigError):
        generate(replace(BROWNIAN, truth="nope"), 0)


def test_truth_norms():
    t = make_truth(BROWNIAN.kernel, "brownian_tent")
    assert t.rkhs_norm == pytest.approx(math.sqrt(0.5))
    spec = KernelSpec.gaussian(0.5)
    t = make_truth(spec, {"anchors": [0.2, 0.8], "coefficients": [1.0, 0.0]})
    assert t.rkhs_norm == pytest.approx(1.0)
    assert t(np.array([[0.2]]))[0] == pytest.approx(1.0)


def test_fitter_self_test():
    cfg = replace(BROWNIAN, self_test_exponent=-0.5)
    rep = run_rate_experiment(cfg, [32, 128, 512, 2048])
    assert rep.fitted_slope == pytest.approx(-0.5, abs=1e-12)
    assert fit_slope([10, 100, 1000], [1e-1, 1e-2, 1e-3])[0] == pytest.approx(-1.0)


def test_fit_slope_drops_noisy_first_point():
    s, _, used = fit_slope([10, 100, 1000, 10000], [5.0, 1e-2, 1e-3, 1e-4], [4.0, 0, 0, 0])
    assert used == 3 and s == pytest.approx(-1.0)


def test_noiseless_in_span_truth_is_recovered():
    spec = KernelSpec.gaussian(0.4)
    pts = [0.1, 0.5, 0.9]
    law = DiscreteDesign.uniform(pts)
    truth = {"anchors": pts, "coefficients": [0.3, -0.2, 0.25]}
    cfg = ScenarioConfig(kernel=spec, truth=truth, covariate_law=law, sigma=0.0, C=1.0,
                         grid_a=1.0, grid_b=0.05, replications=3, mc_points=500, seed=3)
    assert cfg.grid_a * math.sqrt(32) >= make_truth(spec, truth).rkhs_norm
    rep = run_rate_experiment(cfg, [32, 64, 128])
    for row in rep.rows:
        assert row.mean_sq_error < 1e-6


def test_rate_report_deterministic_and_thread_safe():
    a = run_rate_experiment(BROWNIAN, [16, 32, 64])
    b = run_rate_experiment(replace(BROWNIAN, threads=2), [16, 32, 64])
    assert a.to_csv() == b.to_csv()
    assert a.to_json() == run_rate_experiment(BROWNIAN, [16, 32, 64]).to_json()
    header = a.to_csv().splitlines()[0]
    assert header == "n,replication,r_hat,mc_error,mc_se,bound_value,seed"
    assert len(a.to_csv().splitlines()) == 1 + 3 * BROWNIAN.replications
    for row in a.replicate_rows:
        assert row["bound_value"] > 0


def test_needs_three_sizes_and_bounded_truth():
    with pytest.raises(ConfigError):
        run_rate_experiment(BROWNIAN, [32, 64])
    with pytest.raises(ConfigError):
        run_rate_experiment(replace(BROWNIAN, C=0.1), [16, 32, 64])


def test_config_validation():
    with pytest.raises(ConfigError):
        replace(BROWNIAN, replications=0)
    with pytest.raises(ConfigError):
        replace(BROWNIAN, noise="cauchy")
    with pytest.raises(ConfigError):
        replace(BROWNIAN, sigma=-1)


def test_two_dimensional_scenario_runs():
    spec = KernelSpec.gaussian(0.5, Box([0, 0], [1, 1]))
    truth = {"anchors": [[0.2, 0.3], [0.7, 0.6]], "coefficients": [0.4, -0.3]}
    cfg = ScenarioConfig(kernel=spec, truth=truth, sigma=0.05, replications=1, mc_points=200,
                         oracle_design_size=64, seed=1)
    rep = run_rate_experiment(cfg, [8, 16, 32])
    assert len(rep.rows) == 3 and math.isfinite(rep.fitted_slope)
