"""Synthetic PSD test matrices: rotated power-law spectra and Gaussian kernels."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from tracekit.linop import DenseOperator, as_generator, orthonormalize

__all__ = [
    "SpectrumSpec",
    "power_law_matrix",
    "gaussian_kernel_matrix",
    "synthetic_2d_points",
    "load_points",
]


@dataclass(frozen=True)
class SpectrumSpec:
    """Power-law spectrum lambda_i = i^(-exponent), i = 1..dim.

    exponent 0 is the flat spectrum (identity); larger exponents decay
    faster, which is the regime where low-rank deflation wins.
    """

    dim: int
    exponent: float

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if float(self.exponent) < 0.0:
            raise ValueError(f"exponent must be >= 0, got {self.exponent}")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "exponent", float(self.exponent))

    @property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues in descending order (all positive)."""
        return np.arange(1, self.dim + 1, dtype=np.float64) ** (-self.exponent)

    @property
    def trace(self) -> float:
        return float(self.eigenvalues.sum())


def power_law_matrix(spec: SpectrumSpec, rng=None) -> tuple[np.ndarray, DenseOperator]:
    """Dense symmetric PSD matrix with the requested spectrum, plus its operator.

    A = Q^T Lambda Q where Q orthonormalizes a d x d Gaussian draw, then A is
    symmetrized to kill rounding asymmetry.  Eigenvalues match the requested
    i^(-c) law to working precision.
    """
    gen = as_generator(rng)
    d = spec.dim
    Q = orthonormalize(gen.standard_normal((d, d)))
    lam = spec.eigenvalues
    A = (Q.T * lam) @ Q
    A = (A + A.T) / 2.0
    return A, DenseOperator(A)


def gaussian_kernel_matrix(points, gamma: float) -> np.ndarray:
    """Gaussian kernel B_ij = exp(-gamma * ||p_i - p_j||^2), unit diagonal.

    PSD for any point set and gamma > 0.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[0] < 1:
        raise ValueError("need at least one point")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points contain non-finite coordinates")
    gamma = float(gamma)
    if gamma <= 0.0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    sq_dists = cdist(pts, pts, metric="sqeuclidean")
    B = np.exp(-gamma * sq_dists)
    B = (B + B.T) / 2.0
    np.fill_diagonal(B, 1.0)
    return B


def synthetic_2d_points(n: int, rng=None) -> np.ndarray:
    """n uniform points in the unit square, seed-reproducible; shape (n, 2)."""
    n = int(n)
    if n < 1:
        raise ValueError(f"need n >= 1 points, got {n}")
    return as_generator(rng).random((n, 2))


def load_points(path) -> np.ndarray:
    """Read 2-d coordinates from a two-column whitespace or CSV file.

    Coordinates are min-max normalized per axis to [0,1]^2 on ingestion (the
    kernel width convention assumes unit-square coordinates).  A constant
    axis collapses to 0.
    """
    path = Path(path)
    try:
        pts = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except ValueError:
        pts = np.loadtxt(path, dtype=np.float64, ndmin=2, delimiter=",")
    if pts.shape[1] != 2:
        raise ValueError(
            f"{path}: expected two columns (x y per line), got {pts.shape[1]}"
        )
    if not np.all(np.isfinite(pts)):
        raise ValueError(f"{path}: non-finite coordinates")
    lo = pts.min(axis=0)
    span = pts.max(axis=0) - lo
    span[span == 0.0] = 1.0
    return (pts - lo) / span
