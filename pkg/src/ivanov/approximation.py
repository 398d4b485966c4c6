"""Distances from a target function to the radius-r RKHS ball on a finite design.

On a design ``x_1..x_m`` with weights ``w`` only the values of ``h`` at the
design points matter, and projecting ``h`` onto ``span{k_{x_i}}`` keeps those
values while not increasing ``||h||_H``.  The infimum over the whole ball is
therefore a finite-dimensional problem.  Weights are absorbed by rescaling the
kernel to ``sqrt(w_i w_j) k(x_i, x_j)`` and the targets to ``sqrt(w_i) g_i``,
after which the weighted problem is an ordinary norm-constrained fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .core import BisectionOptions, coefficients, mu_zero_threshold, solve_mu
from .eigen import GramDecomposition, eigh
from .kernels import KernelSpec, as_points, gram_matrix

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class DiscreteDesign:
    """Finitely supported covariate law: points with probability weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        p = np.asarray(self.points, dtype=float)
        if p.ndim == 1:
            p = p.reshape(-1, 1)
        if len(w) != len(p) or len(w) == 0:
            raise ValueError("design needs matching, non-empty points and weights")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be non-negative and sum to 1")
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, points) -> "DiscreteDesign":
        p = np.asarray(points, dtype=float)
        return cls(p, np.full(len(p), 1.0 / len(p)))

    def __len__(self):
        return len(self.weights)

    def l2_norm(self, values) -> float:
        v = np.asarray(values, dtype=float)
        return math.sqrt(float(np.sum(self.weights * v * v)))


class BallProjector:
    """Reusable oracle for one (kernel, design, target) triple.

    Holds the decomposition of the weighted Gram matrix so that ``I2`` can be
    evaluated at many radii cheaply.
    """

    def __init__(self, spec: KernelSpec, design: DiscreteDesign, g_values,
                 opts: BisectionOptions | None = None):
        g = np.asarray(g_values, dtype=float)
        if g.shape != (len(design),):
            raise ValueError("g_values must have one entry per design point")
        self.spec = spec
        self.design = design
        self.g = g
        self.opts = opts or BisectionOptions()
        as_points(spec, design.points)
        self.K = gram_matrix(spec, design.points)
        self.sqrt_w = np.sqrt(design.weights)
        self.target = self.sqrt_w * g

    @cached_property
    def weighted_decomp(self) -> GramDecomposition:
        Kw = self.sqrt_w[:, None] * self.K * self.sqrt_w[None, :]
        return eigh(Kw)

    @cached_property
    def threshold(self) -> float:
        """Radius beyond which the weighted residual stops decreasing."""
        return mu_zero_threshold(self.weighted_decomp, self.target)

    def values(self, r: float) -> np.ndarray:
        """Values at the design points of the closest ball element (weighted L2)."""
        if r < 0:
            raise ValueError("radius must be non-negative")
        if r == 0:
            return np.zeros_like(self.g)
        dec = self.weighted_decomp
        mu = solve_mu(dec, self.target, r, self.opts)
        a = coefficients(dec, self.target, mu)
        scaled = (dec.orthogonal * dec.eigenvalues) @ (dec.orthogonal.T @ a)
        out = np.zeros_like(self.g)
        pos = self.sqrt_w > 0
        out[pos] = scaled[pos] / self.sqrt_w[pos]
        return out

    def I2(self, r: float) -> float:
        if r < 0:
            raise ValueError("radius must be non-negative")
        if r == 0:
            return float(np.sum(self.design.weights * self.g**2))
        dec = self.weighted_decomp
        mu = solve_mu(dec, self.target, r, self.opts)
        a = coefficients(dec, self.target, mu)
        fitted = (dec.orthogonal * dec.eigenvalues) @ (dec.orthogonal.T @ a)
        resid = fitted - self.target
        return float(resid @ resid)


def approx_I2(spec: KernelSpec, design: DiscreteDesign, g_values, r: float) -> float:
    """``inf { ||h - g||^2_{L2(P)} : ||h||_H <= r }`` for the discrete law ``P``."""
    if r < 0:
        raise ValueError("radius must be non-negative")
    return BallProjector(spec, design, g_values).I2(r)


def approx_Iinf(spec: KernelSpec, design: DiscreteDesign, g_values, r: float,
                solver_grid: int = 1) -> float:
    """Upper estimate of ``inf { max_i (h(x_i) - g_i)^2 : ||h||_H <= r }``.

    Solved as a second-order cone program in the coordinates
    ``z = D^{1/2} A^T a`` (so ``||h||_H = ||z||``).  The solver output is pulled
    back into the ball before the residual is measured, so the value returned is
    attained by a feasible function.  The weighted-L2 projections at
    ``solver_grid`` radii evenly spaced in ``(0, r]`` are also feasible and are
    used as fallback candidates.
    """
    import cvxpy as cp

    if r < 0:
        raise ValueError("radius must be non-negative")
    if solver_grid < 1:
        raise ValueError("solver_grid must be a positive integer")
    g = np.asarray(g_values, dtype=float)
    if g.shape != (len(design),):
        raise ValueError("g_values must have one entry per design point")
    if r == 0:
        return float(np.max(g**2))
    dec = eigh(gram_matrix(spec, design.points))
    m = dec.rank
    if m == 0:
        return float(np.max(g**2))
    # Values at design points are M z with ||z|| = ||h||_H.
    M = dec.orthogonal[:, :m] * np.sqrt(dec.eigenvalues[:m])
    z = cp.Variable(m)
    t = cp.Variable()
    problem = cp.Problem(cp.Minimize(t), [cp.abs(M @ z - g) <= t, cp.norm(z, 2) <= r])
    try:
        problem.solve(solver=cp.CLARABEL)
    except cp.error.SolverError:
        problem.solve(solver=cp.SCS, eps=1e-9)
    zv = np.zeros(m) if z.value is None else np.asarray(z.value, dtype=float)
    nz = np.linalg.norm(zv)
    if nz > r:
        zv *= r / nz
    best = float(np.max((M @ zv - g) ** 2))
    # L2 projections at radii <= r are feasible too; keep whichever is best.
    proj = BallProjector(spec, design, g)
    for radius in r * np.arange(1, solver_grid + 1) / solver_grid:
        best = min(best, float(np.max((proj.values(radius) - g) ** 2)))
    return best


def interpolation_bound(B: float, beta: float, r: float) -> float:
    """``B^{2/(1-beta)} r^{-2 beta/(1-beta)}``."""
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    if not (B > 0 and r > 0):
        raise ValueError("B and r must be positive")
    return B ** (2.0 / (1.0 - beta)) * r ** (-2.0 * beta / (1.0 - beta))


def golden_section(f, lo: float, hi: float, tol: float = 1e-9,
                   max_iter: int = 500) -> tuple[float, float]:
    """Minimise a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    candidates = [(fc, c), (fd, d), (f(lo), lo), (f(hi), hi)]
    fx, x = min(candidates)
    return x, fx


def k_functional(design: DiscreteDesign, spec: KernelSpec, g_values, t: float,
                 tol: float = 1e-9) -> float:
    """``min_r ( I2(g, r)^{1/2} + t r )``: the K-functional of the pair (L2(P), H)."""
    if not t > 0:
        raise ValueError("t must be positive")
    proj = BallProjector(spec, design, g_values)
    g_norm = design.l2_norm(g_values)
    if g_norm == 0:
        return 0.0
    r_max = g_norm / t + proj.threshold

    def objective(r):
        return math.sqrt(max(proj.I2(r), 0.0)) + t * r

    _, val = golden_section(objective, 0.0, r_max, tol=tol * max(1.0, r_max))
    return float(min(val, g_norm))
