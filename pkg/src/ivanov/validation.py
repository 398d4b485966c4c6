"""Hold-out selection of the ball radius over a finite grid.

The grid is ``{b i : 0 <= i < I} U {a sqrt(n)}`` with ``I = ceil(a sqrt(n) / b)``.
Every grid radius reuses one eigendecomposition of the training Gram matrix;
predictions are clipped to ``[-C, C]`` before the validation risk is taken,
and ties go to the smallest radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (BisectionOptions, IvanovFit, clip, coefficients_many, effective_radius,
                   eigen_fitted, eigen_norm, predict_many, solve_mu_many)
from .eigen import GramDecomposition, eigh
from .kernels import KernelSpec, as_points, cross_gram, gram_matrix


@dataclass(frozen=True)
class ValidationGrid:
    a: float
    b: float
    n: int
    radii: np.ndarray
    rho: float

    def __len__(self):
        return len(self.radii)


@dataclass(frozen=True)
class AdaptiveFit:
    selected_radius: float
    fit: IvanovFit
    clip_bound: float
    validation_risks: list[tuple[float, float]]

    def __call__(self, xs) -> np.ndarray:
        return clip(predict_many(self.fit, xs), self.clip_bound)


def build_grid(a: float, b: float, n: int) -> ValidationGrid:
    if not (a > 0 and b > 0):
        raise ValueError("grid parameters a and b must be positive")
    if n < 1:
        raise ValueError("n must be a positive integer")
    rho = a * math.sqrt(n)
    count = math.ceil(rho / b)
    radii = np.unique(np.append(b * np.arange(count), rho))
    return ValidationGrid(float(a), float(b), int(n), radii, float(rho))


def grid_from_radii(radii) -> ValidationGrid:
    """Arbitrary finite grid (sorted, deduplicated); ``a``/``b`` are recorded as NaN."""
    r = np.unique(np.asarray(radii, dtype=float))
    if len(r) == 0 or r[0] < 0:
        raise ValueError("grid needs at least one non-negative radius")
    return ValidationGrid(float("nan"), float("nan"), 0, r, float(r[-1]))


def validation_risk(predictor, xs_val, y_val, C: float | None = None) -> float:
    """Mean squared hold-out error of ``clip(predictor(x), C)``.

    ``predictor`` is either an ``IvanovFit`` (clipped at ``C``), an ``AdaptiveFit``,
    or any callable mapping an array of points to predictions.
    """
    y_val = np.asarray(y_val, dtype=float)
    if len(y_val) == 0:
        raise ValueError("validation set is empty")
    if isinstance(predictor, IvanovFit):
        if C is None:
            raise ValueError("clip bound C is required for a raw fit")
        pred = clip(predict_many(predictor, xs_val), C)
    else:
        pred = np.asarray(predictor(xs_val), dtype=float)
        if C is not None:
            pred = clip(pred, C)
    if len(pred) != len(y_val):
        raise ValueError("xs_val and y_val lengths differ")
    return float(np.mean((pred - y_val) ** 2))


def _grid_fits(decomp: GramDecomposition, Y: np.ndarray, radii: np.ndarray,
               opts: BisectionOptions) -> tuple[np.ndarray, np.ndarray]:
    """Multipliers and coefficient columns for every radius (radius 0 gives zeros)."""
    mus = np.zeros(len(radii))
    pos = radii > 0
    if pos.any():
        mus[pos], _ = solve_mu_many(decomp, Y, radii[pos], opts)
    coef = coefficients_many(decomp, Y, mus)
    coef[:, ~pos] = 0.0
    return mus, coef


def select_radius(spec: KernelSpec, train, val, grid: ValidationGrid, C: float,
                  opts: BisectionOptions | None = None,
                  decomp: GramDecomposition | None = None,
                  K: np.ndarray | None = None) -> AdaptiveFit:
    """Smallest grid radius minimising the clipped validation risk."""
    opts = opts or BisectionOptions()
    if not C > 0:
        raise ValueError("clip bound C must be positive")
    xs, Y = train
    xv, yv = val
    xs = as_points(spec, xs)
    xv = as_points(spec, xv)
    Y = np.asarray(Y, dtype=float)
    yv = np.asarray(yv, dtype=float)
    if len(Y) == 0 or len(Y) != len(xs):
        raise ValueError("training set must be non-empty with matching lengths")
    if len(yv) == 0 or len(yv) != len(xv):
        raise ValueError("validation set must be non-empty with matching lengths")
    if K is None:
        K = gram_matrix(spec, xs)
    if decomp is None:
        decomp = eigh(K)

    radii = np.asarray(grid.radii, dtype=float)
    mus, coef = _grid_fits(decomp, Y, radii, opts)
    preds = clip(cross_gram(spec, xv, xs) @ coef, C)
    risks = np.mean((preds - yv[:, None]) ** 2, axis=0)
    # argmin returns the first minimiser; radii are sorted ascending.
    j = int(np.argmin(risks))

    a = coef[:, j]
    r = float(radii[j])
    mu = float(mus[j])
    resid = eigen_fitted(decomp, a) - Y
    if r == 0:
        s = 0.0
    elif mu == 0:
        s = r
    else:
        s = effective_radius(decomp, Y, mu)
    chosen = IvanovFit(spec, xs, a, r, mu, eigen_norm(decomp, a), float(resid @ resid), s)
    return AdaptiveFit(r, chosen, float(C), [(float(x), float(v)) for x, v in zip(radii, risks)])
