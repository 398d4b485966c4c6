"""Command-line entry point: ``ivanov {fit,validate,bounds,rates}``.

Configuration is a YAML file; ``--set section.key=value`` overrides are applied
before validation and any key the command does not understand is an error.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import bounds as bnd
from .approximation import DiscreteDesign
from .core import BisectionOptions, fit
from .errors import ConfigError, ConvergenceError, NotPSDError, NumericalError
from .experiments import ScenarioConfig, dump_json, run_rate_experiment
from .kernels import Box, KernelSpec
from .validation import build_grid, grid_from_radii, select_radius

log = logging.getLogger("ivanov")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

KERNEL_KEYS = {"family", "lower", "upper", "lengthscale", "offset", "scale_bound"}
BISECTION_KEYS = {"tolerance", "max_iterations", "strategy", "rel_tolerance", "radius_tolerance"}
DATA_KEYS = {"x", "y", "csv", "val_x", "val_y", "val_csv"}
GRID_KEYS = {"a", "b", "n", "radii"}
BOUND_KEYS = {"k_inf", "sigma", "sigma_tilde", "C", "B", "beta", "n", "n_tilde", "t", "rho",
              "r", "I2", "Iinf", "baseline_risk", "eps", "L", "a"}
SCENARIO_KEYS = {"truth", "covariate_law", "noise", "sigma", "C", "grid_a", "grid_b", "n",
                 "n_tilde_ratio", "replications", "mc_points", "seed", "n_values", "beta", "B",
                 "oracle_design_size", "target_exponent", "self_test_exponent"}
TOP_KEYS = {
    "fit": {"kernel", "bisection", "data", "radius"},
    "validate": {"kernel", "bisection", "data", "grid", "C"},
    "bounds": {"bounds"},
    "rates": {"kernel", "bisection", "scenario"},
}


# Config handling -------------------------------------------------------------

def _strict(section: dict, allowed: set, where: str):
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def apply_overrides(cfg: dict, overrides: list[str]) -> dict:
    cfg = copy.deepcopy(cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"override {item!r}: {exc}") from exc
        parts = key.strip().split(".")
        node = cfg
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-mapping")
        node[parts[-1]] = value
    return cfg


def load_config(path: str | None, overrides: list[str]) -> dict:
    cfg: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            cfg = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} does not parse: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config root must be a mapping")
    return apply_overrides(cfg, overrides)


def parse_kernel(section: dict) -> KernelSpec:
    _strict(section, KERNEL_KEYS, "kernel")
    family = section.get("family")
    if family is None:
        raise ConfigError("kernel.family is required")
    lower = section.get("lower")
    upper = section.get("upper")
    try:
        domain = Box(tuple(lower), tuple(upper)) if lower is not None and upper is not None else None
        if family == "gaussian":
            return KernelSpec.gaussian(section.get("lengthscale", 1.0), domain)
        if family == "laplacian":
            return KernelSpec.laplacian(section.get("lengthscale", 1.0), domain)
        if family == "brownian":
            return KernelSpec.brownian(domain)
        if family == "linear":
            return KernelSpec.linear(section.get("offset", 0.0), section.get("scale_bound", 1.0), domain)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"kernel: {exc}") from exc
    raise ConfigError(f"unknown kernel family {family!r}")


def parse_bisection(section: dict | None) -> BisectionOptions:
    section = section or {}
    _strict(section, BISECTION_KEYS, "bisection")
    try:
        return BisectionOptions(**{k: (float(v) if k in ("tolerance", "rel_tolerance") else v)
                                   for k, v in section.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bisection: {exc}") from exc


def _read_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Numeric CSV with a header row; last column is the response."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise ConfigError(f"{path}: need a header and at least one row")
    try:
        arr = np.array([[float(v) for v in row] for row in rows[1:]])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return arr[:, :-1], arr[:, -1]


def _xy(data: dict, xkey: str, ykey: str, csvkey: str, what: str):
    if csvkey in data:
        return _read_csv(data[csvkey])
    if xkey not in data or ykey not in data:
        raise ConfigError(f"data needs {xkey!r} and {ykey!r} (or {csvkey!r}) for the {what} set")
    try:
        x = np.asarray(data[xkey], dtype=float)
        y = np.asarray(data[ykey], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"data.{xkey}/{ykey}: {exc}") from exc
    if y.ndim != 1 or len(y) == 0:
        raise ConfigError(f"{what} responses must be a non-empty list")
    if len(np.atleast_1d(x)) != len(y) and not (x.ndim == 2 and x.shape[0] == len(y)):
        raise ConfigError(f"{what} covariates and responses differ in length")
    return x, y


def _number(cfg: dict, key: str, positive: bool = False, default=None) -> float:
    if key not in cfg:
        if default is not None:
            return default
        raise ConfigError(f"{key!r} is required")
    try:
        v = float(cfg[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key!r} must be a number") from exc
    if positive and not v > 0:
        raise ConfigError(f"{key!r} must be positive")
    if v < 0 or not math.isfinite(v):
        raise ConfigError(f"{key!r} must be finite and non-negative")
    return v


# Output --------------------------------------------------------------------------

def _suffixed(prefix: Path, ext: str) -> Path:
    return prefix.with_name(prefix.name + ext)


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# Commands ------------------------------------------------------------------------

def cmd_fit(cfg: dict, out: Path) -> int:
    _strict(cfg, TOP_KEYS["fit"], "config")
    spec = parse_kernel(cfg.get("kernel") or {})
    opts = parse_bisection(cfg.get("bisection"))
    data = cfg.get("data") or {}
    _strict(data, DATA_KEYS, "data")
    x, y = _xy(data, "x", "y", "csv", "training")
    r = _number(cfg, "radius")
    try:
        result = fit(spec, x, y, r, opts)
    except NotPSDError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    payload = {
        "coefficients": result.coefficients,
        "mu": result.mu,
        "radius": result.radius,
        "effective_radius": result.effective_radius,
        "achieved_norm": result.achieved_norm,
        "empirical_sse": result.empirical_sse,
        "config": cfg,
    }
    _write(_suffixed(out, ".json"), dump_json(payload))
    print(f"mu={result.mu!r} achieved_norm={result.achieved_norm!r}")
    return EXIT_OK


def cmd_validate(cfg: dict, out: Path) -> int:
    _strict(cfg, TOP_KEYS["validate"], "config")
    spec = parse_kernel(cfg.get("kernel") or {})
    opts = parse_bisection(cfg.get("bisection"))
    data = cfg.get("data") or {}
    _strict(data, DATA_KEYS, "data")
    x, y = _xy(data, "x", "y", "csv", "training")
    xv, yv = _xy(data, "val_x", "val_y", "val_csv", "validation")
    C = _number(cfg, "C", positive=True)
    grid_cfg = cfg.get("grid") or {}
    _strict(grid_cfg, GRID_KEYS, "grid")
    try:
        if "radii" in grid_cfg:
            grid = grid_from_radii(grid_cfg["radii"])
        else:
            grid = build_grid(float(grid_cfg.get("a", 1.0)), float(grid_cfg.get("b", 0.25)),
                              int(grid_cfg.get("n", len(y))))
        adaptive = select_radius(spec, (x, y), (xv, yv), grid, C, opts)
    except NotPSDError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    payload = {
        "r_hat": adaptive.selected_radius,
        "validation_risks": [{"radius": r, "risk": v} for r, v in adaptive.validation_risks],
        "coefficients": adaptive.fit.coefficients,
        "mu": adaptive.fit.mu,
        "achieved_norm": adaptive.fit.achieved_norm,
        "C": C,
        "config": cfg,
    }
    _write(_suffixed(out, ".json"), dump_json(payload))
    print(f"r_hat={adaptive.selected_radius!r}")
    return EXIT_OK


def cmd_bounds(cfg: dict, out: Path) -> int:
    _strict(cfg, TOP_KEYS["bounds"], "config")
    sec = dict(cfg.get("bounds") or {})
    _strict(sec, BOUND_KEYS, "bounds")
    extra = {k: sec.pop(k) for k in ("r", "I2", "Iinf", "baseline_risk", "eps", "L", "a") if k in sec}
    try:
        p = bnd.BoundParams(**sec)
        r = float(extra.get("r", 1.0))
        I2 = float(extra.get("I2", 0.0))
        Iinf = float(extra.get("Iinf", I2))
        base = float(extra.get("baseline_risk", 0.0))
        eps = float(extra.get("eps", 1.0))
        L = float(extra.get("L", 2 * p.C))
        a = float(extra.get("a", 1.0))
        values = {
            "expectation_unclipped": bnd.bound_expectation_unclipped(p, r, I2),
            "expectation_clipped": bnd.bound_expectation_clipped(p, r, I2),
            "optimal_radius_clipped": bnd.optimal_radius_clipped(p),
            "optimal_radius_unclipped": bnd.optimal_radius_unclipped(p),
            "optimal_radius_unclipped_numeric": bnd.optimal_radius_unclipped_numeric(p),
            "clipped_rate_bound": bnd.clipped_rate_bound(p),
            "validation_expectation": bnd.bound_validation_expectation(p, base),
            "covering_bound": bnd.covering_bound(p.k_inf, p.rho, eps),
            "entropy_integral": bnd.entropy_integral(p.k_inf, p.rho, p.C, L, a),
            "entropy_integral_numeric": bnd.entropy_integral(p.k_inf, p.rho, p.C, L, a, numeric=True),
            "entropy_integral_full": bnd.entropy_integral_full(p.k_inf, p.rho, p.C),
        }
        if p.t >= 1:
            values["highprob_clipped"] = bnd.bound_highprob_clipped(p, r, Iinf)
            values["validation_highprob"] = bnd.bound_validation_highprob(p, base)
            values["optimal_radius_highprob"] = bnd.optimal_radius_highprob(p)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bounds: {exc}") from exc
    _write(_suffixed(out, ".json"), dump_json({"values": values, "config": cfg}))
    for k in sorted(values):
        print(f"{k}={values[k]!r}")
    return EXIT_OK


def parse_scenario(cfg: dict, threads: int = 1) -> ScenarioConfig:
    spec = parse_kernel(cfg.get("kernel") or {})
    opts = parse_bisection(cfg.get("bisection"))
    sc = dict(cfg.get("scenario") or {})
    _strict(sc, SCENARIO_KEYS, "scenario")
    law = sc.pop("covariate_law", None)
    if law is not None:
        if law == "uniform" or (isinstance(law, dict) and law.get("type") == "uniform"):
            law = None
        elif isinstance(law, dict) and law.get("type") == "discrete":
            _strict(law, {"type", "points", "weights"}, "scenario.covariate_law")
            try:
                law = DiscreteDesign(law["points"], law["weights"])
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"covariate_law: {exc}") from exc
        else:
            raise ConfigError("covariate_law must be 'uniform' or a discrete design mapping")
    if "n_values" in sc:
        sc["n_values"] = tuple(int(v) for v in sc["n_values"])
    if "seed" in sc:
        sc["seed"] = int(sc["seed"])
    try:
        return ScenarioConfig(kernel=spec, covariate_law=law, bisection=opts, threads=threads, **sc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"scenario: {exc}") from exc


def cmd_rates(cfg: dict, out: Path, threads: int = 1) -> int:
    _strict(cfg, TOP_KEYS["rates"], "config")
    scenario = parse_scenario(cfg, threads)
    try:
        report = run_rate_experiment(scenario)
    except (NotPSDError, ConfigError):
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    summary = report.summary()
    summary["resolved_config"] = cfg
    _write(_suffixed(out, ".csv"), report.to_csv())
    _write(_suffixed(out, ".json"), dump_json(summary))
    print(f"fitted_slope={report.fitted_slope!r}")
    return EXIT_OK


# Entry point -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ivanov", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(TOP_KEYS))
    parser.add_argument("--config", help="YAML configuration file")
    parser.add_argument("--out", default="ivanov_out", help="output path prefix")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config value (repeatable)")
    parser.add_argument("--seed", type=int, help="scenario seed (rates)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for replications")
    parser.add_argument("--log-level", default="WARNING")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        overrides = list(args.overrides)
        if args.seed is not None and args.command == "rates":
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            overrides.append(f"scenario.seed={args.seed}")
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg = load_config(args.config, overrides)
        if args.command == "fit":
            return cmd_fit(cfg, out)
        if args.command == "validate":
            return cmd_validate(cfg, out)
        if args.command == "bounds":
            return cmd_bounds(cfg, out)
        return cmd_rates(cfg, out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ConvergenceError, NotPSDError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
