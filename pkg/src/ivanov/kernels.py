"""Bounded kernels on axis-aligned boxes and Gram matrix construction.

Every family here is bounded and continuous on a bounded box, so its RKHS is
separable and ``sup_norm`` has a closed form.

>>> spec = KernelSpec.brownian()
>>> gram_matrix(spec, [0.5, 1.0])
array([[0.5, 0.5],
       [0.5, 1. ]])
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError

FAMILIES = ("gaussian", "laplacian", "brownian", "linear")


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lower_j, upper_j]`` in R^d."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or not lo:
            raise ValueError("box bounds must have equal non-zero length")
        if any(not (a <= b) for a, b in zip(lo, hi)):
            raise ValueError(f"empty box: lower={lo}, upper={hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @classmethod
    def interval(cls, lo: float = 0.0, hi: float = 1.0) -> "Box":
        return cls((lo,), (hi,))

    def contains(self, xs: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return np.all((xs >= lo) & (xs <= hi), axis=-1)

    def max_sq_norm(self) -> float:
        """Largest squared Euclidean norm of a point in the box."""
        return float(sum(max(a * a, b * b) for a, b in zip(self.lower, self.upper)))


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family, its parameters and the box it lives on.

    Use the classmethod constructors rather than building this directly.
    """

    family: str
    domain: Box
    lengthscale: float = 1.0
    offset: float = 0.0
    scale_bound: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if self.family in ("gaussian", "laplacian") and not self.lengthscale > 0:
            raise ValueError("lengthscale must be positive")
        if self.family == "brownian":
            if self.domain.dim != 1 or self.domain.lower[0] < 0.0 or self.domain.upper[0] > 1.0:
                raise ValueError("Brownian motion kernel requires a sub-interval of [0, 1]")
        if self.family == "linear":
            if self.offset < 0:
                raise ValueError("linear kernel offset must be non-negative")
            if not self.scale_bound > 0:
                raise ValueError("linear kernel scale bound must be positive")
            if self.domain.max_sq_norm() > self.scale_bound**2 * (1 + 1e-12):
                raise ValueError("box domain exceeds the linear kernel scale bound")

    @classmethod
    def gaussian(cls, lengthscale: float = 1.0, domain: Box | None = None) -> "KernelSpec":
        return cls("gaussian", domain or Box.interval(0.0, 1.0), lengthscale=float(lengthscale))

    @classmethod
    def laplacian(cls, lengthscale: float = 1.0, domain: Box | None = None) -> "KernelSpec":
        return cls("laplacian", domain or Box.interval(0.0, 1.0), lengthscale=float(lengthscale))

    @classmethod
    def brownian(cls, domain: Box | None = None) -> "KernelSpec":
        return cls("brownian", domain or Box.interval(0.0, 1.0))

    @classmethod
    def linear(cls, offset: float = 0.0, scale_bound: float = 1.0,
               domain: Box | None = None) -> "KernelSpec":
        if domain is None:
            domain = Box.interval(-scale_bound, scale_bound)
        return cls("linear", domain, offset=float(offset), scale_bound=float(scale_bound))

    @property
    def dim(self) -> int:
        return self.domain.dim

    def to_dict(self) -> dict:
        out = {"family": self.family, "lower": list(self.domain.lower),
               "upper": list(self.domain.upper)}
        if self.family in ("gaussian", "laplacian"):
            out["lengthscale"] = self.lengthscale
        if self.family == "linear":
            out["offset"] = self.offset
            out["scale_bound"] = self.scale_bound
        return out


def as_points(spec: KernelSpec, xs, check: bool = True) -> np.ndarray:
    """Coerce ``xs`` to an ``(n, d)`` float array and check it lies in the domain."""
    arr = np.asarray(xs, dtype=float)
    d = spec.dim
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        # A flat vector is n points when d == 1, else a single point.
        arr = arr.reshape(-1, 1) if d == 1 else arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != d:
        raise DomainError(f"expected points of dimension {d}, got array of shape {np.shape(xs)}")
    if check:
        if not np.all(np.isfinite(arr)):
            raise DomainError("points must be finite")
        inside = spec.domain.contains(arr)
        if not np.all(inside):
            bad = arr[~inside][0]
            raise DomainError(f"point {bad.tolist()} outside domain {spec.domain}")
    return arr


def _cross(spec: KernelSpec, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    fam = spec.family
    if fam == "brownian":
        return np.minimum(x[:, 0][:, None], z[:, 0][None, :])
    if fam == "linear":
        return spec.offset + x @ z.T
    diff = x[:, None, :] - z[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    if fam == "gaussian":
        return np.exp(-sq / (2.0 * spec.lengthscale**2))
    return np.exp(-np.sqrt(sq) / spec.lengthscale)


def eval_kernel(spec: KernelSpec, x1, x2) -> float:
    p = as_points(spec, x1)
    q = as_points(spec, x2)
    if len(p) != 1 or len(q) != 1:
        raise DomainError("eval_kernel takes single points")
    return float(_cross(spec, p, q)[0, 0])


def sup_norm(spec: KernelSpec) -> float:
    """``sup_x k(x, x)^{1/2}`` over the declared domain, in closed form."""
    if spec.family in ("gaussian", "laplacian"):
        return 1.0
    if spec.family == "brownian":
        return float(np.sqrt(spec.domain.upper[0]))
    return float(np.sqrt(spec.offset + spec.domain.max_sq_norm()))


def gram_matrix(spec: KernelSpec, xs: Sequence) -> np.ndarray:
    """Symmetric ``n x n`` matrix of kernel evaluations at ``xs``."""
    pts = as_points(spec, xs)
    if len(pts) == 0:
        raise ValueError("gram_matrix needs at least one point")
    K = _cross(spec, pts, pts)
    # Linear kernel goes through a matmul; force exact symmetry.
    return np.triu(K) + np.triu(K, 1).T


def cross_gram(spec: KernelSpec, xs, zs, chunk: int = 4096) -> np.ndarray:
    """Rectangular matrix ``k(xs_i, zs_j)``, built in row chunks."""
    p = as_points(spec, xs)
    q = as_points(spec, zs)
    if len(p) <= chunk:
        return _cross(spec, p, q)
    return np.vstack([_cross(spec, p[i:i + chunk], q) for i in range(0, len(p), chunk)])
