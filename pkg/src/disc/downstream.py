"""Feature grouping, meta-features and a classification-based evaluation.

Rows of a differential-vector matrix ``V`` (one row per feature) are
clustered with k-means; each cluster becomes a meta-feature by averaging the
data columns it contains. A small multinomial logistic regression measures
how well such meta-features separate labelled classes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .data_io import DataMatrix
from .errors import InputError, ParameterError, ShapeError
from .feature_graph import KernelSpec

N_RESTARTS = 10
MAX_ITER = 300
TOL = 1e-6


@dataclass(frozen=True, eq=False)
class FeatureClustering:
    labels: np.ndarray
    k: int
    inertia: float
    restart: int = 0


@dataclass(frozen=True, eq=False)
class MetaFeatures:
    values: np.ndarray


def _values(data) -> np.ndarray:
    return data.values if isinstance(data, DataMatrix) else np.asarray(data, dtype=np.float64)


def _sq_dists(X, C):
    d = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _kmeanspp(X, k, rng):
    n = X.shape[0]
    centers = [int(rng.integers(n))]
    closest = _sq_dists(X, X[centers])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centers.append(idx)
        closest = np.minimum(closest, _sq_dists(X, X[[idx]])[:, 0])
    return X[centers].copy()


def _assign(X, C, k):
    D = _sq_dists(X, C)
    labels = np.argmin(D, axis=1)
    # refill empty clusters with the worst-fitting point of a cluster that can spare one
    for c in range(k):
        if np.any(labels == c):
            continue
        own = D[np.arange(len(X)), labels]
        counts = np.bincount(labels, minlength=k)
        own = np.where(counts[labels] > 1, own, -1.0)
        j = int(np.argmax(own))
        labels[j] = c
        D[j] = np.inf
        D[j, c] = 0.0
    return labels


def _means(X, labels, k):
    C = np.zeros((k, X.shape[1]))
    np.add.at(C, labels, X)
    return C / np.bincount(labels, minlength=k)[:, None]


def _lloyd(X, k, rng, max_iter, tol):
    C = _kmeanspp(X, k, rng)
    for _ in range(max_iter):
        labels = _assign(X, C, k)
        new = _means(X, labels, k)
        shift = np.max(np.linalg.norm(new - C, axis=1))
        C = new
        if shift <= tol:
            break
    labels = _assign(X, C, k)
    C = _means(X, labels, k)
    inertia = float(((X - C[labels]) ** 2).sum())
    return labels, inertia


def _canonical(labels, k):
    """Renumber clusters in order of first appearance."""
    first = {}
    for lab in labels:
        if lab not in first:
            first[lab] = len(first)
    remap = np.array([first[c] for c in range(k)])
    return remap[labels]


def cluster_features(v, k: int, seed: int = 0, n_restarts: int = N_RESTARTS,
                     max_iter: int = MAX_ITER, tol: float = TOL) -> FeatureClustering:
    """k-means over the rows of ``v`` (features x vectors).

    k-means++ seeding, ``n_restarts`` independent restarts (restart ``i``
    uses the ``i``-th child of ``SeedSequence(seed)``), Lloyd iterations
    until no centroid moves more than ``tol``. The lowest-inertia restart
    wins, ties going to the earlier restart. Labels are numbered in order
    of first appearance.
    """
    X = np.asarray(v, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    p = X.shape[0]
    if X.shape[1] < 1:
        raise ParameterError("need at least one vector to cluster on")
    if not 1 <= k <= p:
        raise ParameterError(f"k={k} must satisfy 1 <= k <= p={p}")
    if k > len(np.unique(X, axis=0)):
        raise ParameterError(f"k={k} exceeds the number of distinct rows")
    best = None
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(n_restarts)):
        labels, inertia = _lloyd(X, k, np.random.default_rng(child), max_iter, tol)
        if best is None or inertia < best[1]:
            best = (labels, inertia, i)
    labels, inertia, i = best
    return FeatureClustering(_canonical(labels, k), k, inertia, i)


def meta_features(data, v) -> MetaFeatures:
    """Per-sample projections ``X @ V`` onto each loading vector."""
    X = _values(data)
    V = np.asarray(v, dtype=np.float64)
    if V.ndim == 1:
        V = V[:, None]
    if V.shape[0] != X.shape[1]:
        raise ShapeError(f"data has {X.shape[1]} features but loadings have {V.shape[0]} rows")
    return MetaFeatures(X @ V)


def cluster_mean_features(data, clustering: FeatureClustering) -> np.ndarray:
    """Column ``c`` is the mean of the data columns labelled ``c``."""
    X = _values(data)
    labels = np.asarray(clustering.labels)
    if labels.shape != (X.shape[1],):
        raise ShapeError("one label per feature is required")
    k = clustering.k
    if labels.min() < 0 or labels.max() >= k:
        raise ParameterError("label out of range")
    S = np.zeros((k, X.shape[1]))
    S[labels, np.arange(X.shape[1])] = 1.0
    counts = S.sum(1)
    if (counts == 0).any():
        raise ParameterError("empty cluster")
    return X @ (S / counts[:, None]).T


class LogisticModel:
    """Multinomial logistic regression by full-batch gradient descent.

    Inputs are z-scored with training statistics; constant columns are left
    centred but unscaled.
    """

    def __init__(self, classes: int, lr: float = 0.1, n_iter: int = 2000, l2: float = 1e-4):
        self.classes, self.lr, self.n_iter, self.l2 = classes, lr, n_iter, l2

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=int)
        if len(np.unique(y)) < 2:
            raise InputError("training labels contain a single class")
        if y.min() < 0 or y.max() >= self.classes:
            raise InputError(f"labels must lie in [0, {self.classes})")
        self.mu = X.mean(0)
        sd = X.std(0)
        self.sd = np.where(sd > 0, sd, 1.0)
        Z = (X - self.mu) / self.sd
        n, f = Z.shape
        Y = np.eye(self.classes)[y]
        W = np.zeros((f, self.classes))
        b = np.zeros(self.classes)
        for _ in range(self.n_iter):
            G = _softmax(Z @ W + b) - Y
            W -= self.lr * (Z.T @ G / n + self.l2 * W)
            b -= self.lr * G.mean(0)
        self.W, self.b = W, b
        return self

    def predict(self, X):
        Z = (np.asarray(X, dtype=np.float64) - self.mu) / self.sd
        return np.argmax(Z @ self.W + self.b, axis=1)

    def accuracy(self, X, y) -> float:
        return float(np.mean(self.predict(X) == np.asarray(y)))


def _softmax(S):
    S = S - S.max(1, keepdims=True)
    E = np.exp(S)
    return E / E.sum(1, keepdims=True)


def logistic_eval(train, train_labels, test, test_labels, classes: int, **kw) -> float:
    """Test accuracy of a logistic model fit on ``train``."""
    train, test = np.asarray(train, dtype=np.float64), np.asarray(test, dtype=np.float64)
    if train.ndim != 2 or test.ndim != 2 or train.shape[1] != test.shape[1]:
        raise ShapeError("train and test must be 2-d with the same number of columns")
    return LogisticModel(classes, **kw).fit(train, train_labels).accuracy(test, test_labels)


def significance_elbow(sigma) -> int:
    """1-based index after which the largest consecutive drop occurs."""
    s = np.asarray(sigma, dtype=np.float64)
    if s.size < 2:
        raise ParameterError("need at least two significance values")
    return int(np.argmax(s[:-1] - s[1:])) + 1


@dataclass
class EvalReport:
    accuracy: float
    clusterings: list
    significance: list


def evaluate_protocol(class_data: Sequence[DataMatrix], test, test_labels, d=20, n_vectors: int = 3,
                      k_clusters: int = 10, seed: int = 0, kernel: Optional[KernelSpec] = None,
                      r: Optional[int] = None) -> EvalReport:
    """Differential features per class -> k-means -> cluster means -> logistic accuracy.

    ``class_data[c]`` holds the training samples of class ``c``. For each
    class the top ``n_vectors`` differential vectors against all other
    classes are clustered into ``k_clusters`` feature groups; the group
    means of every class are concatenated into the meta-feature matrix.
    """
    from .spectral import disc_multi

    class_data = list(class_data)
    C = len(class_data)
    results = disc_multi(class_data, d=d, r=r if r is not None else max(n_vectors, 1), kernel=kernel)
    clusterings = [cluster_features(res.vectors[:, :n_vectors], k_clusters, seed) for res in results]

    def features(X):
        return np.hstack([cluster_mean_features(X, cl) for cl in clusterings])

    train = np.vstack([features(x) for x in class_data])
    labels = np.concatenate([np.full(x.sample_count, c) for c, x in enumerate(class_data)])
    acc = logistic_eval(train, labels, features(test), test_labels, C)
    return EvalReport(acc, clusterings, [res.significance for res in results])
