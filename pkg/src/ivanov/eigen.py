"""Sorted symmetric eigendecomposition ``K = A diag(D) A^T`` with numerical rank."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotPSDError

DEFAULT_RANK_TOLERANCE = 1e-10
SYMMETRY_TOLERANCE = 1e-9
NEGATIVE_TOLERANCE = 1e-8


@dataclass(frozen=True)
class GramDecomposition:
    """Orthogonal ``A`` and non-increasing, clamped non-negative eigenvalues ``D``.

    ``rank`` counts eigenvalues strictly above ``rank_tolerance * D[0]``; because
    ``D`` is sorted these are exactly the first ``rank`` entries.
    """

    orthogonal: np.ndarray
    eigenvalues: np.ndarray
    rank: int
    rank_tolerance: float = DEFAULT_RANK_TOLERANCE

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    def project(self, y) -> np.ndarray:
        """``A^T y``."""
        return self.orthogonal.T @ np.asarray(y, dtype=float)

    def reconstruct(self) -> np.ndarray:
        A = self.orthogonal
        return (A * self.eigenvalues) @ A.T


def eigh(K, rank_tolerance: float = DEFAULT_RANK_TOLERANCE) -> GramDecomposition:
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {K.shape}")
    if not rank_tolerance > 0:
        raise ValueError("rank_tolerance must be positive")
    scale = max(1.0, float(np.max(np.abs(K))))
    if np.max(np.abs(K - K.T)) > SYMMETRY_TOLERANCE * scale:
        raise ValueError("matrix is not symmetric")

    w, A = np.linalg.eigh(K)
    # LAPACK returns ascending order.
    w = w[::-1].copy()
    A = A[:, ::-1].copy()
    top = max(w[0], 0.0)
    if w[-1] < -NEGATIVE_TOLERANCE * top or (top == 0.0 and w[-1] < 0.0):
        raise NotPSDError(f"eigenvalue {w[-1]:.3e} below -{NEGATIVE_TOLERANCE:g} * {top:.3e}")
    w = np.maximum(w, 0.0)
    return GramDecomposition(A, w, rank_of_values(w, rank_tolerance), rank_tolerance)


def rank_of_values(eigenvalues: np.ndarray, rank_tolerance: float) -> int:
    top = eigenvalues[0] if len(eigenvalues) else 0.0
    if top <= 0.0:
        return 0
    return int(np.count_nonzero(eigenvalues > rank_tolerance * top))


def rank_of(decomp: GramDecomposition) -> int:
    return rank_of_values(decomp.eigenvalues, decomp.rank_tolerance)
