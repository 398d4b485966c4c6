"""Closed-form risk bounds for the norm-constrained estimator and its variants.

All evaluators take the approximation term (``I2``, ``Iinf`` or a baseline
risk) as an argument, so they can be paired with any oracle.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from scipy import integrate, optimize

from .approximation import interpolation_bound

SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class BoundParams:
    """Constants shared by the bounds.

    ``k_inf`` is the kernel sup norm, ``sigma``/``sigma_tilde`` the training and
    validation noise scales, ``C`` the clip level, ``(B, beta)`` the
    interpolation-space norm bound and exponent, ``t`` the tail parameter of
    the high-probability bounds and ``rho`` the largest grid radius.
    """

    k_inf: float = 1.0
    sigma: float = 0.0
    sigma_tilde: float = 0.0
    C: float = 1.0
    B: float = 1.0
    beta: float = 0.5
    n: int = 1
    n_tilde: int = 1
    t: float = 1.0
    rho: float = 0.0

    def __post_init__(self):
        for name in ("k_inf", "sigma", "sigma_tilde", "rho"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not self.B > 0:
            raise ValueError("B must be positive")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.n < 1 or self.n_tilde < 1:
            raise ValueError("sample sizes must be positive")

    def replace(self, **kw) -> "BoundParams":
        return BoundParams(**{**asdict(self), **kw})

    def to_dict(self) -> dict:
        return asdict(self)


def _check_r(r: float):
    if r < 0:
        raise ValueError("radius must be non-negative")


def _check_t(t: float):
    if t < 1:
        raise ValueError("tail parameter t must be at least 1")


def bound_expectation_unclipped(p: BoundParams, r: float, I2: float) -> float:
    """Expected squared L2 error of the unclipped estimator at radius ``r``."""
    _check_r(r)
    rn = math.sqrt(p.n)
    return 8 * p.k_inf * p.sigma * r / rn + 64 * p.k_inf**2 * r**2 / rn + 10 * I2


def bound_expectation_clipped(p: BoundParams, r: float, I2: float) -> float:
    _check_r(r)
    return 8 * p.k_inf * (16 * p.C + p.sigma) * r / math.sqrt(p.n) + 10 * I2


def bound_highprob_clipped(p: BoundParams, r: float, Iinf: float) -> float:
    """Holds with probability at least ``1 - 3 exp(-t)``."""
    _check_r(r)
    _check_t(p.t)
    C, k = p.C, p.k_inf
    inner = 2 * C**2 + 8 * math.sqrt(k) * C**1.5 * math.sqrt(r) + k * (16 * C + 5 * p.sigma) * r
    return 8 * inner * math.sqrt(p.t) / math.sqrt(p.n) + 16 * C**2 * p.t / (3 * p.n) + 10 * Iinf


def _log_factor(p: BoundParams) -> float:
    return math.sqrt(2 * math.log(2 + p.k_inf**2 * p.rho**2 / p.C**2)) + SQRT_PI


def bound_validation_expectation(p: BoundParams, baseline_risk: float) -> float:
    """Risk of the validated estimator given the expected risk at some grid radius."""
    C = p.C
    return 32 * C * (4 * C + p.sigma_tilde) / math.sqrt(p.n_tilde) * _log_factor(p) + 10 * baseline_risk


def bound_validation_highprob(p: BoundParams, baseline_risk: float) -> float:
    _check_t(p.t)
    C, t, nt = p.C, p.t, p.n_tilde
    first = 4 * C * (5 * C + 24 * p.sigma_tilde) * math.sqrt(t) / math.sqrt(nt) * (1 + 32 * _log_factor(p))
    return first + 48 * C**2 * math.sqrt(t) / math.sqrt(nt) + 16 * C**2 * t / (3 * nt) + 10 * baseline_risk


# Radii and rate constants ----------------------------------------------------

def optimal_radius_clipped(p: BoundParams) -> float:
    """Minimiser over ``r`` of the clipped expectation bound with the interpolation term."""
    b = p.beta
    e = (1 - b) / (1 + b)
    D1 = (5 * b / (2 * (1 - b))) ** e
    return (D1 * p.k_inf ** (-e) * p.B ** (2 / (1 + b)) * (16 * p.C + p.sigma) ** (-e)
            * p.n ** ((1 - b) / (2 * (1 + b))))


def clipped_rate_constant(beta: float) -> float:
    """Constant multiplying ``n^{-beta/(1+beta)}`` at the optimal clipped radius."""
    b = beta
    e = (1 - b) / (1 + b)
    f = 2 * b / (1 + b)
    return 2 * 5**e * 4**f * ((2 * b / (1 - b)) ** e + ((1 - b) / (2 * b)) ** f)


def clipped_rate_bound(p: BoundParams) -> float:
    """Clipped expectation bound evaluated at its optimal radius, in rate form."""
    b = p.beta
    f = 2 * b / (1 + b)
    return (clipped_rate_constant(b) * p.k_inf**f * p.B ** (2 / (1 + b))
            * (16 * p.C + p.sigma) ** f * p.n ** (-b / (1 + b)))


def optimal_radius_unclipped(p: BoundParams) -> float:
    """Displayed radius that balances the quadratic and approximation terms only."""
    b = p.beta
    return ((5 * b / (32 * (1 - b))) ** ((1 - b) / 2) * p.k_inf ** (-(1 - b)) * p.B
            * p.n ** ((1 - b) / 4))


def unclipped_rate_constants(beta: float) -> tuple[float, float]:
    """``(D2, D3)`` for the unclipped rate at the displayed radius."""
    b = beta
    q = 5 * b / (32 * (1 - b))
    return 64 * q ** (1 - b) + 10 * (1 / q) ** b, 8 * q ** ((1 - b) / 2)


def optimal_radius_unclipped_numeric(p: BoundParams) -> float:
    """Numeric minimiser of all three unclipped terms with the interpolation term."""
    def total(log_r):
        r = math.exp(log_r)
        return bound_expectation_unclipped(p, r, interpolation_bound(p.B, p.beta, r))

    start = math.log(optimal_radius_unclipped(p))
    res = optimize.minimize_scalar(total, bounds=(start - 30, start + 30), method="bounded",
                                   options={"xatol": 1e-12})
    return math.exp(res.x)


def optimal_radius_highprob(p: BoundParams) -> float:
    """Radius balancing the dominant high-probability terms."""
    _check_t(p.t)
    b = p.beta
    e = (1 - b) / (1 + b)
    D1 = (5 * b / (2 * (1 - b))) ** e
    return (D1 * p.k_inf ** (-e) * p.B ** (2 / (1 + b)) * (16 * p.C + 5 * p.sigma) ** (-e)
            * p.t ** (-e / 2) * p.n ** ((1 - b) / (2 * (1 + b))))


# Covering numbers --------------------------------------------------------------

def covering_bound(k_inf: float, rho: float, eps: float) -> float:
    """Sup-norm covering number bound for the clipped estimators over radii in ``[0, rho]``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return 1 + k_inf**2 * rho**2 / (2 * eps**2)


def entropy_integral(k_inf: float, rho: float, C: float, L: float, a: float = 1.0,
                     numeric: bool = False) -> float:
    """Bound on ``int_0^L sqrt(log(a N(eps))) d eps``.

    With ``numeric=True`` the integral of the covering bound itself is computed
    by adaptive quadrature instead, for checking the closed form.  ``C`` enters
    only through :func:`entropy_integral_full`.
    """
    if not L > 0:
        raise ValueError("L must be positive")
    if a < 1:
        raise ValueError("a must be at least 1")
    if numeric:
        def integrand(eps):
            return math.sqrt(math.log(a * covering_bound(k_inf, rho, eps)))

        val, _ = integrate.quad(integrand, 0.0, L, limit=200, epsabs=1e-12, epsrel=1e-10)
        return val
    return math.sqrt(math.log((1 + k_inf**2 * rho**2 / (2 * L**2)) * a)) * L + math.sqrt(math.pi / 2) * L


def entropy_integral_full(k_inf: float, rho: float, C: float) -> float:
    """Bound on the whole entropy integral (``a = 1``), using that ``N = 1`` past ``2C``."""
    if not C > 0:
        raise ValueError("C must be positive")
    return 2 * math.sqrt(math.log(1 + k_inf**2 * rho**2 / (8 * C**2))) * C + math.sqrt(2 * math.pi) * C
