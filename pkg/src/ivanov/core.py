"""Norm-constrained kernel least squares via the Lagrange multiplier ``mu(r)``.

For ``K = A D A^T`` and ``c = A^T Y`` the constrained minimiser over the ball
of radius ``r`` has coefficients ``A w`` with ``w_i = c_i / (D_i + n mu)`` on
the first ``m = rank K`` modes and zero elsewhere.  ``mu(r)`` is zero once
``r`` reaches the interpolation threshold, and otherwise is the unique root of

    sum_i D_i c_i^2 / (D_i + n mu)^2 = r^2,

which is decreasing in ``mu`` and is found by bisection on a bracket whose
upper end is ``(sum_i D_i c_i^2)^{1/2} / (n r)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .eigen import DEFAULT_RANK_TOLERANCE, GramDecomposition, eigh
from .errors import ConvergenceError, NumericalError
from .kernels import KernelSpec, as_points, cross_gram, gram_matrix

DIAGONALISED = "diagonalised"
MATRIX_SOLVE = "matrix_solve"


@dataclass(frozen=True)
class BisectionOptions:
    """Stopping rules for the multiplier search.

    ``tolerance`` is the absolute guarantee on ``|nu - mu|``.  The search also
    keeps halving until the bracket is within ``rel_tolerance * mu``, which is
    what controls ``| ||h|| - r |`` when ``mu`` is tiny.  If
    ``radius_tolerance`` is set, the search stops as soon as the effective
    radius of the midpoint is within that distance of ``r`` (diagonalised
    strategy only, and only for ``r > 2 * radius_tolerance``).
    """

    tolerance: float = 1e-10
    max_iterations: int = 200
    strategy: str = DIAGONALISED
    rel_tolerance: float = 1e-12
    radius_tolerance: float | None = None

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")
        if self.strategy not in (DIAGONALISED, MATRIX_SOLVE):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.rel_tolerance < 0:
            raise ValueError("rel_tolerance must be non-negative")
        if self.radius_tolerance is not None and not self.radius_tolerance > 0:
            raise ValueError("radius_tolerance must be positive")


@dataclass(frozen=True)
class IvanovFit:
    spec: KernelSpec
    design: np.ndarray
    coefficients: np.ndarray
    radius: float
    mu: float
    achieved_norm: float
    empirical_sse: float
    effective_radius: float = field(default=float("nan"))
    iterations: int = 0

    @property
    def n(self) -> int:
        return len(self.coefficients)

    def __call__(self, xs) -> np.ndarray:
        return predict_many(self, xs)


def _modes(decomp: GramDecomposition, Y) -> tuple[np.ndarray, np.ndarray]:
    """Positive eigenvalues and squared projections on the first ``m`` modes."""
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (decomp.n,):
        raise ValueError(f"Y has shape {Y.shape}, expected ({decomp.n},)")
    m = decomp.rank
    c = decomp.project(Y)[:m]
    return decomp.eigenvalues[:m], c * c


def mu_zero_threshold(decomp: GramDecomposition, Y) -> float:
    """Smallest radius ``r*`` at which the constraint is inactive (``mu = 0``)."""
    d, c2 = _modes(decomp, Y)
    if len(d) == 0:
        return 0.0
    return math.sqrt(float(np.sum(c2 / d)))


def _norm_sq(d: np.ndarray, c2: np.ndarray, n: int, mu) -> np.ndarray:
    """``sum_i D_i c_i^2 / (D_i + n mu)^2``, vectorised over an array of ``mu``."""
    mu = np.asarray(mu, dtype=float)
    denom = d[None, :] + n * mu.reshape(-1, 1)
    return np.sum(d[None, :] * c2[None, :] / (denom * denom), axis=1).reshape(mu.shape)


def _bisect(value_sq: Callable[[np.ndarray], np.ndarray], r: np.ndarray, lo: np.ndarray,
            hi: np.ndarray, opts: BisectionOptions) -> tuple[np.ndarray, int]:
    """Vectorised bisection for the root of the decreasing map ``value_sq(mu) = r^2``.

    A lane is finished once its bracket is below ``2 * tolerance`` and either the
    bracket is relatively tight or the squared radius at the midpoint matches
    ``r^2`` to ``rel_tolerance``.  Returns midpoints and the iteration count.
    """
    lo = lo.astype(float).copy()
    hi = hi.astype(float).copy()
    target = r * r
    eps = opts.tolerance
    rtol = opts.rel_tolerance
    ctol = opts.radius_tolerance
    radius_active = r > 2.0 * ctol if ctol is not None else np.zeros(len(r), dtype=bool)
    out = np.empty(len(r))
    idx = np.arange(len(r))
    it = 0
    while len(idx):
        if it >= opts.max_iterations:
            raise ConvergenceError(
                f"bisection did not reach tolerance {eps:g} in {opts.max_iterations} iterations")
        it += 1
        a, b, t = lo[idx], hi[idx], target[idx]
        mid = 0.5 * (a + b)
        v = value_sq(mid)
        width = b - a
        done = (width <= 2.0 * eps) & ((width <= 2.0 * rtol * a) | (np.abs(v - t) <= 2.0 * rtol * t))
        # Bracket at floating-point resolution; nothing more to gain.
        done |= (mid <= a) | (mid >= b)
        if ctol is not None:
            done |= radius_active[idx] & (np.abs(np.sqrt(np.maximum(v, 0.0)) - r[idx]) <= ctol)
        out[idx[done]] = mid[done]
        # norm^2 decreasing in mu: too large a norm means mu is too small.
        above = v > t
        lo[idx[above]] = mid[above]
        hi[idx[~above]] = mid[~above]
        idx = idx[~done]
    return out, it


def solve_mu_many(decomp: GramDecomposition, Y, radii,
                  opts: BisectionOptions | None = None) -> tuple[np.ndarray, int]:
    """Multipliers for many radii over one decomposition (diagonalised strategy)."""
    opts = opts or BisectionOptions()
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if np.any(radii <= 0):
        raise ValueError("radius must be positive")
    d, c2 = _modes(decomp, Y)
    n = decomp.n
    out = np.zeros(len(radii))
    if len(d) == 0:
        return out, 0
    r_star = math.sqrt(float(np.sum(c2 / d)))
    need = radii < r_star
    if not need.any():
        return out, 0
    r = radii[need]
    upper = math.sqrt(float(np.sum(d * c2))) / (n * r)
    mus, it = _bisect(lambda mu: _norm_sq(d, c2, n, mu), r, np.zeros(len(r)), upper, opts)
    out[need] = mus
    return out, it


def solve_mu(decomp: GramDecomposition, Y, r: float, opts: BisectionOptions | None = None) -> float:
    if not r > 0:
        raise ValueError("radius must be positive")
    mus, _ = solve_mu_many(decomp, Y, [r], opts)
    return float(mus[0])


def _psi_sq(K: np.ndarray, Y: np.ndarray, mu: float) -> float:
    """``Y^T (K + n mu I)^{-1} K (K + n mu I)^{-1} Y`` via one Cholesky solve."""
    n = len(Y)
    try:
        v = sla.cho_solve(sla.cho_factor(K + n * mu * np.eye(n)), Y)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"linear solve failed at mu={mu:g}: {exc}") from exc
    return float(v @ K @ v)


def solve_mu_matrix(K, Y, r: float, opts: BisectionOptions | None = None) -> float:
    """Multiplier without diagonalising ``K``; never returns less than ``tolerance``.

    Each evaluation costs one Cholesky solve.  On numerically singular ``K``
    the value at ``mu = tolerance`` is dominated by rounding in the near-null
    directions, so prefer :func:`solve_mu` there.
    """
    opts = opts or BisectionOptions(strategy=MATRIX_SOLVE)
    if not r > 0:
        raise ValueError("radius must be positive")
    K = np.asarray(K, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = len(Y)
    eps = opts.tolerance
    if r >= math.sqrt(max(_psi_sq(K, Y, eps), 0.0)):
        return eps
    upper = math.sqrt(max(float(Y @ K @ Y), 0.0)) / (n * r)
    # Radius mode needs the diagonal form; here only the mu criteria apply.
    plain = BisectionOptions(eps, opts.max_iterations, MATRIX_SOLVE, opts.rel_tolerance)

    def value_sq(mu):
        return np.array([_psi_sq(K, Y, m) for m in np.atleast_1d(mu)])

    mus, _ = _bisect(value_sq, np.array([float(r)]), np.array([eps]), np.array([upper]), plain)
    return float(mus[0])


def coefficients(decomp: GramDecomposition, Y, mu: float) -> np.ndarray:
    """``a = A w`` with ``w_i = (A^T Y)_i / (D_i + n mu)`` for ``i <= m``, else 0."""
    if mu < 0:
        raise ValueError("mu must be non-negative")
    Y = np.asarray(Y, dtype=float)
    m = decomp.rank
    A = decomp.orthogonal
    c = decomp.project(Y)[:m]
    w = c / (decomp.eigenvalues[:m] + decomp.n * mu)
    return A[:, :m] @ w


def coefficients_many(decomp: GramDecomposition, Y, mus) -> np.ndarray:
    """Coefficient matrix with one column per multiplier."""
    mus = np.asarray(mus, dtype=float)
    m = decomp.rank
    c = decomp.project(Y)[:m]
    W = c[:, None] / (decomp.eigenvalues[:m, None] + decomp.n * mus[None, :])
    return decomp.orthogonal[:, :m] @ W


def effective_radius(decomp: GramDecomposition, Y, nu: float) -> float:
    """Radius ``s`` with ``mu(s) = nu``: the multiplier-``nu`` estimator is exactly ``h_s``."""
    if not nu > 0:
        raise ValueError("nu must be positive")
    d, c2 = _modes(decomp, Y)
    if len(d) == 0:
        return 0.0
    return math.sqrt(float(_norm_sq(d, c2, decomp.n, nu)))


def rkhs_norm(coef: np.ndarray, K: np.ndarray) -> float:
    return math.sqrt(max(float(coef @ K @ coef), 0.0))


def eigen_norm(decomp: GramDecomposition, coef) -> float:
    """``(a^T K a)^{1/2}`` evaluated as ``(sum_i D_i (A^T a)_i^2)^{1/2}``.

    Same quantity as :func:`rkhs_norm` for ``K = A D A^T``, but without the
    cancellation of ``a^T K a`` when ``a`` is large and ``K`` ill-conditioned.
    """
    w = decomp.project(coef)
    return math.sqrt(float(np.sum(decomp.eigenvalues * w * w)))


def eigen_fitted(decomp: GramDecomposition, coef) -> np.ndarray:
    """``K a`` evaluated as ``A (D * A^T a)``."""
    return decomp.orthogonal @ (decomp.eigenvalues * decomp.project(coef))


def fit(spec: KernelSpec, xs, Y, r: float, opts: BisectionOptions | None = None,
        decomp: GramDecomposition | None = None, K: np.ndarray | None = None) -> IvanovFit:
    """Constrained least-squares fit over the radius-``r`` ball.

    ``decomp`` and ``K`` may be passed in to reuse work across radii.
    """
    opts = opts or BisectionOptions()
    pts = as_points(spec, xs)
    Y = np.asarray(Y, dtype=float)
    if len(pts) != len(Y) or len(Y) == 0:
        raise ValueError("xs and Y must be non-empty and of equal length")
    if r < 0:
        raise ValueError("radius must be non-negative")
    if K is None:
        K = gram_matrix(spec, pts)
    n = len(Y)
    if r == 0:
        a = np.zeros(n)
        return IvanovFit(spec, pts, a, 0.0, 0.0, 0.0, float(Y @ Y), 0.0)

    it = 0
    if opts.strategy == MATRIX_SOLVE:
        mu = solve_mu_matrix(K, Y, r, opts)
        try:
            a = sla.cho_solve(sla.cho_factor(K + n * mu * np.eye(n)), Y)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalError(str(exc)) from exc
        s = rkhs_norm(a, K)
    else:
        if decomp is None:
            decomp = eigh(K, DEFAULT_RANK_TOLERANCE)
        mus, it = solve_mu_many(decomp, Y, [r], opts)
        mu = float(mus[0])
        a = coefficients(decomp, Y, mu)
        s = r if mu == 0.0 else effective_radius(decomp, Y, mu)
        resid = eigen_fitted(decomp, a) - Y
        return IvanovFit(spec, pts, a, float(r), mu, eigen_norm(decomp, a), float(resid @ resid),
                         s, it)
    resid = K @ a - Y
    return IvanovFit(spec, pts, a, float(r), mu, s, float(resid @ resid), s, it)


def predict_many(fit_: IvanovFit, xs, chunk: int = 4096) -> np.ndarray:
    pts = as_points(fit_.spec, xs)
    a = fit_.coefficients
    if not np.any(a):
        return np.zeros(len(pts))
    return np.concatenate([cross_gram(fit_.spec, pts[i:i + chunk], fit_.design) @ a
                           for i in range(0, len(pts), chunk)])


def predict(fit_: IvanovFit, x) -> float:
    """``sum_i a_i k(X_i, x)`` at a single point."""
    pts = as_points(fit_.spec, x)
    if len(pts) != 1:
        raise ValueError("predict takes a single point; use predict_many")
    return float(predict_many(fit_, pts)[0])


def clip(t, C: float):
    """Projection onto ``[-C, C]``; works elementwise on arrays."""
    if not C > 0:
        raise ValueError("clip bound C must be positive")
    out = np.clip(t, -C, C)
    return float(out) if np.ndim(out) == 0 else out
