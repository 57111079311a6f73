"""Kernel graphs over the feature columns of a data matrix.

Each feature (column) is a node; edge weights come from an RBF kernel on the
Euclidean distance between columns. The default kernel uses a self-tuning
bandwidth: node ``i`` gets the scale ``sigma_i`` equal to the distance to its
k-th nearest feature, and ``W_ij = exp(-|x_i - x_j|^2 / (sigma_i sigma_j))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .data_io import DataMatrix
from .errors import DegenerateInputError, ParameterError

SELF_TUNING = "rbf_self_tuning"
FIXED = "rbf_fixed"


def default_knn(p: int) -> int:
    """``ceil(log p)``, clipped to ``[1, p - 1]``."""
    return int(min(max(1, math.ceil(math.log(p))), p - 1))


@dataclass(frozen=True)
class KernelSpec:
    kind: str = SELF_TUNING
    bandwidth: Optional[float] = None
    knn_k: Optional[int] = None

    def __post_init__(self):
        if self.kind not in (SELF_TUNING, FIXED):
            raise ParameterError(f"unknown kernel kind {self.kind!r}")
        if self.kind == FIXED and not (self.bandwidth is not None and self.bandwidth > 0):
            raise ParameterError("fixed-bandwidth kernel needs bandwidth > 0")
        if self.knn_k is not None and self.knn_k < 1:
            raise ParameterError("knn_k must be a positive integer")

    def resolve_k(self, p: int) -> int:
        k = default_knn(p) if self.knn_k is None else int(self.knn_k)
        if not 1 <= k < p:
            raise ParameterError(f"knn_k={k} must satisfy 1 <= k < p={p}")
        return k

    def describe(self, p: int) -> dict:
        if self.kind == FIXED:
            return {"kernel": self.kind, "bandwidth": self.bandwidth, "knn_k": None}
        return {"kernel": self.kind, "bandwidth": None, "knn_k": self.resolve_k(p)}


@dataclass(frozen=True, eq=False)
class FeatureGraph:
    """Symmetric weights ``W``, degrees ``d`` and random-walk matrix ``P = D^-1 W``."""

    weights: np.ndarray
    degrees: np.ndarray
    rw_matrix: np.ndarray
    bandwidths: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    def laplacian(self) -> np.ndarray:
        """Unnormalized Laplacian ``D - W``."""
        return np.diag(self.degrees) - self.weights


def squared_distances(values: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances between the columns of ``values``."""
    cols = np.ascontiguousarray(np.asarray(values, dtype=np.float64).T)
    return squareform(pdist(cols, "sqeuclidean"))


def _sigmas_from_sq(sq: np.ndarray, k: int) -> np.ndarray:
    p = sq.shape[0]
    if not 1 <= k < p:
        raise ParameterError(f"k={k} must satisfy 1 <= k < p={p}")
    dist = np.sqrt(sq)
    off = dist.copy()
    np.fill_diagonal(off, np.inf)
    sigma = np.sort(off, axis=1)[:, k - 1]
    zero = sigma <= 0
    if zero.any():
        # duplicated columns: fall back to the nearest strictly positive distance
        pos = np.where(off > 0, off, np.inf).min(axis=1)
        if not np.isfinite(pos[zero]).all():
            raise DegenerateInputError("all feature columns are identical; no positive distance")
        sigma = np.where(zero, pos, sigma)
    return sigma


def self_tuning_sigmas(data, k: Optional[int] = None) -> np.ndarray:
    """Distance from each column to its k-th nearest other column.

    Columns that coincide with k or more others would get a zero scale; they
    fall back to their smallest positive neighbour distance instead.
    """
    values = data.values if isinstance(data, DataMatrix) else np.asarray(data, dtype=np.float64)
    p = values.shape[1]
    k = default_knn(p) if k is None else int(k)
    return _sigmas_from_sq(squared_distances(values), k)


def _row_sums(W: np.ndarray) -> np.ndarray:
    # sum in sorted order so relabelling the nodes cannot change the rounding
    return np.sort(W, axis=1).sum(axis=1)


def from_weights(W: np.ndarray, bandwidths=None) -> FeatureGraph:
    W = np.asarray(W, dtype=np.float64)
    deg = _row_sums(W)
    if not (deg > 0).all():
        raise DegenerateInputError("graph has an isolated node (zero degree)")
    P = W / deg[:, None]
    for arr in (W, deg, P):
        arr.setflags(write=False)
    return FeatureGraph(W, deg, P, bandwidths)


def build_graph(data, kernel: KernelSpec | None = None) -> FeatureGraph:
    """Build the feature graph of ``data`` (a DataMatrix or an ``n x p`` array)."""
    kernel = kernel or KernelSpec()
    values = data.values if isinstance(data, DataMatrix) else np.asarray(data, dtype=np.float64)
    p = values.shape[1]
    if p < 2:
        raise ParameterError("need at least two features")
    sq = squared_distances(values)
    if kernel.kind == FIXED:
        W = np.exp(-sq / kernel.bandwidth ** 2)
        sig = None
    else:
        k = kernel.resolve_k(p)
        sig = _sigmas_from_sq(sq, k)
        W = np.exp(-sq / np.multiply.outer(sig, sig))
    np.fill_diagonal(W, 1.0)
    return from_weights(W, sig)


def standardize(data: DataMatrix) -> DataMatrix:
    """Z-score each column; constant columns become all-zero."""
    X = data.values
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    Z = np.where(sd > 0, (X - mu) / np.where(sd > 0, sd, 1.0), 0.0)
    return DataMatrix(Z, data.feature_ids)
