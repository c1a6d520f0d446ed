"""Gaussian basis functions.

The density-ratio models in this package are linear in a fixed dictionary
of Gaussian bumps ``phi_l(x) = exp(-||x - c_l||^2 / (2 sigma^2))`` whose
centres are subsampled from the unlabeled data. This module owns centre
selection, basis evaluation, and the median-distance bandwidth heuristic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import DegenerateDataError

__all__ = ["GaussianBasis", "select_centers", "eval_basis", "median_bandwidth"]

MEDIAN_SUBSAMPLE = 500


@dataclass(frozen=True)
class GaussianBasis:
    """A set of Gaussian bump functions with one shared bandwidth.

    :param centers: centre matrix, one centre per row.
    :param bandwidth: the scale sigma, strictly positive.
    """

    centers: np.ndarray
    bandwidth: float

    def __post_init__(self) -> None:
        C = np.asarray(self.centers, dtype=float)
        if C.ndim != 2 or C.shape[0] < 1:
            raise ValueError(f"centers must be a non-empty 2-d array, got shape {C.shape}")
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be strictly positive, got {self.bandwidth}")
        object.__setattr__(self, "centers", C)
        object.__setattr__(self, "bandwidth", float(self.bandwidth))

    @property
    def size(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


def select_centers(unlabeled: np.ndarray, b_max: int, seed) -> np.ndarray:
    """Pick ``min(b_max, n)`` rows of ``unlabeled`` without replacement."""
    U = np.asarray(unlabeled, dtype=float)
    if b_max < 1:
        raise ValueError(f"b_max must be at least 1, got {b_max}")
    if U.ndim != 2 or U.shape[0] < 1:
        raise ValueError("unlabeled must be a non-empty 2-d array")
    rng = np.random.default_rng(seed)
    keep = rng.choice(U.shape[0], size=min(b_max, U.shape[0]), replace=False)
    return U[keep]


def eval_basis(basis: GaussianBasis, points: np.ndarray) -> np.ndarray:
    """Evaluate every basis function at every point.

    Returns an ``(n, b)`` matrix with entry ``exp(-||x_i - c_l||^2 /
    (2 sigma^2))``; a point sitting on its centre gives exactly 1.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim != 2 or X.shape[1] != basis.dim:
        raise ValueError(
            f"points must be 2-d with {basis.dim} columns, got shape {X.shape}"
        )
    sq = cdist(X, basis.centers, metric="sqeuclidean")
    return np.exp(-sq / (2.0 * basis.bandwidth**2))


def median_bandwidth(points: np.ndarray, seed, subsample: int = MEDIAN_SUBSAMPLE) -> float:
    """Median pairwise Euclidean distance, on a subsample for large inputs.

    At most ``subsample`` rows (drawn without replacement) enter the
    pairwise computation, so cost stays bounded on big datasets.

    :raises DegenerateDataError: when the median distance is zero.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need at least two points for a pairwise median")
    if subsample < 2:
        raise ValueError(f"subsample must be at least 2, got {subsample}")
    if X.shape[0] > subsample:
        rng = np.random.default_rng(seed)
        X = X[rng.choice(X.shape[0], size=subsample, replace=False)]
    med = float(np.median(pdist(X)))
    if med <= 0.0:
        raise DegenerateDataError("median pairwise distance is zero; data has no spread")
    return med
