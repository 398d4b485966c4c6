"""Synthetic regression scenarios and Monte-Carlo convergence-rate experiments.

Randomness is drawn from Philox generators keyed by
``(seed, n, replicate, purpose)`` so every stream is independent and a run is
reproducible bit-for-bit whatever the evaluation order.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from .approximation import BallProjector, DiscreteDesign, interpolation_bound
from .bounds import (BoundParams, bound_expectation_clipped, bound_validation_expectation,
                     clipped_rate_bound, optimal_radius_clipped)
from .core import BisectionOptions
from .eigen import eigh
from .errors import ConfigError
from .kernels import Box, KernelSpec, as_points, cross_gram, gram_matrix, sup_norm
from .validation import build_grid, select_radius

log = logging.getLogger(__name__)

PURPOSES = {"train_x": 0, "train_noise": 1, "val_x": 2, "val_noise": 3, "mc": 4, "design": 5}
CSV_COLUMNS = ("n", "replication", "r_hat", "mc_error", "mc_se", "bound_value", "seed")


# Truth functions -------------------------------------------------------------

@dataclass(frozen=True)
class Truth:
    """Regression function ``g`` with optional known RKHS norm (``nan`` if not in H)."""

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    rkhs_norm: float = float("nan")

    def __call__(self, xs: np.ndarray) -> np.ndarray:
        return self.func(np.asarray(xs, dtype=float))


def _tent(x):
    return np.minimum(x[:, 0], 0.5)


def _step(x):
    return np.where(x[:, 0] > 0.5, 0.5, -0.5)


def _sine(x):
    return np.sin(2 * np.pi * x[:, 0])


# name -> (function, RKHS norm under the Brownian kernel on [0, 1])
TRUTHS: dict[str, tuple[Callable, float]] = {
    "zero": (lambda x: np.zeros(len(x)), 0.0),
    "brownian_tent": (_tent, math.sqrt(0.5)),
    "identity": (lambda x: x[:, 0].copy(), 1.0),
    "step": (_step, float("inf")),
    "sine": (_sine, math.sqrt(2.0) * math.pi),
}


def make_truth(spec: KernelSpec, truth) -> Truth:
    """Resolve a registry name or an in-span ``{"anchors", "coefficients"}`` mapping."""
    if isinstance(truth, str):
        if truth not in TRUTHS:
            raise ConfigError(f"unknown truth {truth!r}; known: {sorted(TRUTHS)}")
        func, norm = TRUTHS[truth]
        if spec.family != "brownian":
            norm = float("nan")
        return Truth(truth, func, norm)
    if isinstance(truth, dict):
        try:
            anchors = as_points(spec, truth["anchors"])
            coef = np.asarray(truth["coefficients"], dtype=float)
        except KeyError as exc:
            raise ConfigError(f"in-span truth needs {exc.args[0]!r}") from exc
        if coef.shape != (len(anchors),):
            raise ConfigError("in-span truth: one coefficient per anchor")
        norm = math.sqrt(max(float(coef @ gram_matrix(spec, anchors) @ coef), 0.0))
        return Truth("in_span", lambda x: cross_gram(spec, x, anchors) @ coef, norm)
    raise ConfigError(f"unsupported truth specification {truth!r}")


# Covariate laws ----------------------------------------------------------------

@dataclass(frozen=True)
class UniformBox:
    box: Box

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        lo = np.asarray(self.box.lower)
        hi = np.asarray(self.box.upper)
        return lo + (hi - lo) * rng.random((size, len(lo)))


def sample_covariates(law, rng: np.random.Generator, size: int) -> np.ndarray:
    if isinstance(law, DiscreteDesign):
        idx = rng.choice(len(law), size=size, p=law.weights)
        return law.points[idx]
    return law.sample(rng, size)


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


# Scenario ------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioConfig:
    kernel: KernelSpec
    truth: object = "brownian_tent"
    covariate_law: object = None
    noise: str = "gaussian"
    sigma: float = 0.1
    C: float = 1.0
    grid_a: float = 1.0
    grid_b: float = 0.25
    n: int = 32
    n_tilde_ratio: float = 1.0
    replications: int = 1
    mc_points: int = 20000
    seed: int = 0
    n_values: tuple[int, ...] = (32, 128, 512, 2048)
    beta: float = 0.5
    B: float | None = None
    oracle_design_size: int = 512
    target_exponent: float = -0.5
    self_test_exponent: float | None = None
    bisection: BisectionOptions = field(default_factory=BisectionOptions)
    threads: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if self.mc_points < 1:
            raise ConfigError("mc_points must be at least 1")
        if self.sigma < 0:
            raise ConfigError("sigma must be non-negative")
        if self.noise not in ("gaussian", "uniform"):
            raise ConfigError(f"unknown noise law {self.noise!r}")
        if not self.C > 0:
            raise ConfigError("C must be positive")
        if self.n < 1 or self.n_tilde_ratio <= 0:
            raise ConfigError("n and n_tilde_ratio must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.covariate_law is None:
            object.__setattr__(self, "covariate_law", UniformBox(self.kernel.domain))

    @property
    def n_tilde(self) -> int:
        return max(1, int(round(self.n_tilde_ratio * self.n)))

    def law(self):
        return self.covariate_law

    def to_dict(self) -> dict:
        law = self.covariate_law
        if isinstance(law, DiscreteDesign):
            law_d = {"type": "discrete", "points": law.points.tolist(), "weights": law.weights.tolist()}
        else:
            law_d = {"type": "uniform"}
        out = {
            "kernel": self.kernel.to_dict(),
            "truth": self.truth,
            "covariate_law": law_d,
            "bisection": asdict(self.bisection),
        }
        for k in ("noise", "sigma", "C", "grid_a", "grid_b", "n", "n_tilde_ratio", "replications",
                  "mc_points", "seed", "beta", "B", "oracle_design_size", "target_exponent",
                  "self_test_exponent"):
            out[k] = getattr(self, k)
        out["n_values"] = list(self.n_values)
        return out


@dataclass(frozen=True)
class Dataset:
    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray
    truth: Truth


def _noise(config: ScenarioConfig, rng: np.random.Generator, size: int) -> np.ndarray:
    if config.sigma == 0:
        return np.zeros(size)
    if config.noise == "gaussian":
        return config.sigma * rng.standard_normal(size)
    w = config.sigma * math.sqrt(3.0)
    return rng.uniform(-w, w, size)


def generate(config: ScenarioConfig, replicate_index: int) -> Dataset:
    """Training and validation samples for one replicate at ``config.n``."""
    truth = make_truth(config.kernel, config.truth)
    n, nt, seed = config.n, config.n_tilde, config.seed
    law = config.law()
    xs = sample_covariates(law, stream(seed, n, replicate_index, PURPOSES["train_x"]), n)
    ys = truth(xs) + _noise(config, stream(seed, n, replicate_index, PURPOSES["train_noise"]), n)
    xv = sample_covariates(law, stream(seed, n, replicate_index, PURPOSES["val_x"]), nt)
    yv = truth(xv) + _noise(config, stream(seed, n, replicate_index, PURPOSES["val_noise"]), nt)
    return Dataset(xs, ys, xv, yv, truth)


def mc_sq_error(predictor, truth, covariate_law, mc_points: int, seed) -> tuple[float, float]:
    """Mean and standard error of ``(predictor(x) - g(x))^2`` over ``x ~ P``."""
    if mc_points < 2:
        raise ValueError("mc_points must be at least 2")
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed)
    xs = sample_covariates(covariate_law, rng, mc_points)
    err = (np.asarray(predictor(xs), dtype=float) - np.asarray(truth(xs), dtype=float)) ** 2
    return float(np.mean(err)), float(np.std(err, ddof=1) / math.sqrt(mc_points))


# Rate experiments ------------------------------------------------------------------

@dataclass(frozen=True)
class RateRow:
    n: int
    mean_sq_error: float
    std_error: float
    mean_bound: float


@dataclass
class RateReport:
    rows: list[RateRow]
    fitted_slope: float
    fitted_intercept: float
    target_exponent: float
    replicate_rows: list[dict] = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "fitted_slope": self.fitted_slope,
            "intercept": self.fitted_intercept,
            "target_exponent": self.target_exponent,
            "rows": [asdict(r) for r in self.rows],
            "per_n": self.extras.get("per_n", []),
            "slope_points_used": self.extras.get("slope_points_used"),
            "notes": ("Only slopes are checked; the constants in the theoretical rates are not "
                      "numerically specified and are not reproduced."),
            "config": self.config,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.replicate_rows:
            w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
        return buf.getvalue()

    def to_json(self) -> str:
        return dump_json(self.summary())


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dump_json(obj) -> str:
    """Sorted, indented JSON; non-finite floats become null."""
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def fit_slope(ns, means, ses=None) -> tuple[float, float, int]:
    """Least-squares line through ``(log n, log mean)``.

    The smallest ``n`` is dropped when its standard error exceeds a quarter of
    its mean and at least two points would remain.  Returns
    ``(slope, intercept, points_used)``.
    """
    ns = np.asarray(ns, dtype=float)
    means = np.asarray(means, dtype=float)
    order = np.argsort(ns)
    ns, means = ns[order], means[order]
    start = 0
    if ses is not None:
        ses = np.asarray(ses, dtype=float)[order]
        if len(ns) > 2 and ses[0] > 0.25 * means[0]:
            start = 1
    x = np.log(ns[start:])
    y = np.log(means[start:])
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept), len(x)


def default_B(truth: Truth, covariate_law, beta: float, mc_seed: int = 0) -> float:
    """``||g||_H^beta ||g||_{L2}^{1-beta}``, a valid interpolation-norm bound for ``g`` in H."""
    if not math.isfinite(truth.rkhs_norm):
        return float("nan")
    if truth.rkhs_norm == 0:
        return 1e-12
    if isinstance(covariate_law, DiscreteDesign):
        l2 = covariate_law.l2_norm(truth(covariate_law.points))
    else:
        xs = covariate_law.sample(stream(mc_seed, 0, 0, PURPOSES["design"]), 200000)
        l2 = math.sqrt(float(np.mean(truth(xs) ** 2)))
    return truth.rkhs_norm**beta * l2 ** (1 - beta)


class _Oracle:
    """I2 at grid radii on a fixed discrete design, cached by radius."""

    def __init__(self, config: ScenarioConfig, truth: Truth):
        law = config.law()
        if isinstance(law, DiscreteDesign):
            design = law
        else:
            m = config.oracle_design_size
            box = config.kernel.domain
            if box.dim == 1:
                lo, hi = box.lower[0], box.upper[0]
                pts = lo + (hi - lo) * (np.arange(m) + 0.5) / m
            else:
                pts = law.sample(stream(config.seed, 0, 0, PURPOSES["design"]), m)
            design = DiscreteDesign.uniform(pts)
        self.projector = BallProjector(config.kernel, design, truth(as_points(config.kernel, design.points)))
        self._cache: dict[float, float] = {}

    def I2(self, r: float) -> float:
        if r not in self._cache:
            self._cache[r] = self.projector.I2(r)
        return self._cache[r]


def _bound_params(config: ScenarioConfig, n: int, rho: float, B: float) -> BoundParams:
    return BoundParams(k_inf=sup_norm(config.kernel), sigma=config.sigma, sigma_tilde=config.sigma,
                       C=config.C, B=B if B and math.isfinite(B) else 1.0, beta=config.beta,
                       n=n, n_tilde=max(1, int(round(config.n_tilde_ratio * n))), rho=rho)


def run_replicate(config: ScenarioConfig, rep: int, oracle: _Oracle | None) -> dict:
    data = generate(config, rep)
    K = gram_matrix(config.kernel, data.train_x)
    decomp = eigh(K)
    grid = build_grid(config.grid_a, config.grid_b, config.n)
    adaptive = select_radius(config.kernel, (data.train_x, data.train_y), (data.val_x, data.val_y),
                             grid, config.C, config.bisection, decomp=decomp, K=K)
    mc_rng = stream(config.seed, config.n, rep, PURPOSES["mc"])
    err, se = mc_sq_error(adaptive, data.truth, config.law(), config.mc_points, mc_rng)
    r_hat = adaptive.selected_radius
    bound = float("nan")
    if oracle is not None:
        p = _bound_params(config, config.n, grid.rho, config.B)
        bound = bound_expectation_clipped(p, r_hat, oracle.I2(r_hat))
    return {"n": config.n, "replication": rep, "r_hat": r_hat, "mc_error": err, "mc_se": se,
            "bound_value": bound, "seed": config.seed}


def run_rate_experiment(config: ScenarioConfig, n_values=None) -> RateReport:
    """Replicated train/validate/select/evaluate pipelines across sample sizes."""
    n_values = sorted(int(v) for v in (n_values if n_values is not None else config.n_values))
    if len(n_values) < 3:
        raise ConfigError("need at least three sample sizes to fit a rate")
    truth = make_truth(config.kernel, config.truth)
    B = config.B
    if B is None:
        B = default_B(truth, config.law(), config.beta, config.seed)
    config = replace(config, B=B)

    oracle = None
    if config.self_test_exponent is None:
        oracle = _Oracle(config, truth)
        if np.max(np.abs(oracle.projector.g)) > config.C:
            raise ConfigError(f"truth exceeds the clip bound C={config.C} on the oracle design")

    rep_rows: list[dict] = []
    rows: list[RateRow] = []
    per_n: list[dict] = []
    for n in n_values:
        cfg_n = replace(config, n=n)
        if config.self_test_exponent is not None:
            e = float(n) ** config.self_test_exponent
            results = [{"n": n, "replication": i, "r_hat": float("nan"), "mc_error": e, "mc_se": 0.0,
                        "bound_value": float("nan"), "seed": config.seed}
                       for i in range(config.replications)]
        elif config.threads > 1:
            with ThreadPoolExecutor(config.threads) as pool:
                results = list(pool.map(lambda i: run_replicate(cfg_n, i, oracle),
                                        range(config.replications)))
        else:
            results = [run_replicate(cfg_n, i, oracle) for i in range(config.replications)]
        rep_rows.extend(results)
        errs = np.array([r["mc_error"] for r in results])
        bounds = np.array([r["bound_value"] for r in results])
        se = float(np.std(errs, ddof=1) / math.sqrt(len(errs))) if len(errs) > 1 else 0.0
        rows.append(RateRow(n, float(np.mean(errs)), se, float(np.mean(bounds))))
        per_n.append(_comparison_columns(cfg_n, oracle))
        log.info("n=%d mean error %.4g (se %.2g)", n, rows[-1].mean_sq_error, se)

    slope, intercept, used = fit_slope([r.n for r in rows], [r.mean_sq_error for r in rows],
                                       [r.std_error for r in rows])
    return RateReport(rows, slope, intercept, config.target_exponent, rep_rows,
                      {"per_n": per_n, "slope_points_used": used}, config.to_dict())


def _comparison_columns(config: ScenarioConfig, oracle: _Oracle | None) -> dict:
    """Theory columns at ``config.n``: optimal clipped radius and the validation bound."""
    out = {"n": config.n}
    if oracle is None or not (config.B and math.isfinite(config.B)):
        return out
    grid = build_grid(config.grid_a, config.grid_b, config.n)
    p = _bound_params(config, config.n, grid.rho, config.B)
    r_opt = optimal_radius_clipped(p)
    r0 = float(grid.radii[np.argmin(np.abs(grid.radii - r_opt))])
    baseline = bound_expectation_clipped(p, r0, oracle.I2(r0))
    out.update({
        "optimal_radius": r_opt,
        "grid_radius_r0": r0,
        "clipped_bound_at_r0": baseline,
        "clipped_bound_interpolation_at_optimum": bound_expectation_clipped(
            p, r_opt, interpolation_bound(p.B, p.beta, r_opt)),
        "clipped_rate_bound": clipped_rate_bound(p),
        "validation_bound": bound_validation_expectation(p, baseline),
    })
    return out
