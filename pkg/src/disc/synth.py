"""Seeded synthetic datasets with known differential features.

Correlated feature groups are two-component Gaussian mixtures: each sample is
``offset * c * 1 + low-rank part + nugget noise`` with ``c = +-1`` equally
likely, so features in a group are strongly correlated while groups are
independent of each other. Every column is scaled to unit variance.

Randomness is split so regeneration never drifts: all covariance factors are
drawn from ``default_rng([seed, 0])`` in a fixed order, and the samples of
dataset ``m`` come from ``default_rng([seed, 1, m])``, column block by column
block from left to right.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data_io import DataMatrix
from .errors import ParameterError

PROBLEMS = ("newly_connected", "split_groups", "split_both", "multi3", "partial_corr")

OFFSET = 1.5
LOWRANK_SCALE = 0.2
NUGGET = 0.2
RANK = 5
DECAY = 1.0


class ConstantColumnWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ToySpec:
    problem: str = "newly_connected"
    n: int = 10000
    seed: int = 0
    rho: float = 1.0

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ParameterError(f"unknown problem {self.problem!r}; choose from {', '.join(PROBLEMS)}")
        if self.n < 100:
            raise ParameterError("n must be at least 100")
        if not 0.0 <= self.rho <= 1.0:
            raise ParameterError("rho must lie in [0, 1]")


@dataclass(frozen=True)
class Block:
    """A column range and the covariance its samples are drawn from."""

    start: int
    stop: int
    covariance: Optional[np.ndarray]  # None means i.i.d. standard normal


@dataclass
class ToyOutput:
    datasets: list
    ground_truth: list
    names: list
    blocks: list = field(default_factory=list)

    def ground_truth_dict(self) -> dict:
        return {name: [int(i) for i in gt] for name, gt in zip(self.names, self.ground_truth)}


class MixtureGroup:
    """Low-rank plus nugget Gaussian mixture over ``m`` features.

    The low-rank factor ``G`` has a constant first column (the direction of
    the mixture offset) and random orthonormal remaining columns; its
    eigenvalues decay like ``exp(-i * decay)``.
    """

    def __init__(self, rng, m: int, rank: int = RANK, decay: float = DECAY):
        lam = np.exp(-decay * np.arange(1, rank + 1))
        self.lam = lam / lam.sum()
        A = np.column_stack([np.ones(m), rng.standard_normal((m, rank - 1))])
        self.G, _ = np.linalg.qr(A)
        self.m = m
        raw = LOWRANK_SCALE ** 2 * m * (self.G ** 2) @ self.lam + OFFSET ** 2 + NUGGET
        self.scale = np.sqrt(raw)

    def covariance(self) -> np.ndarray:
        C = LOWRANK_SCALE ** 2 * (self.G * (self.lam * self.m)) @ self.G.T
        C += OFFSET ** 2
        C[np.diag_indices(self.m)] += NUGGET
        return C / np.multiply.outer(self.scale, self.scale)

    def sample(self, rng, n: int) -> np.ndarray:
        z = rng.standard_normal((n, self.lam.size))
        X = LOWRANK_SCALE * (z * np.sqrt(self.lam * self.m)) @ self.G.T
        c = rng.choice([-1.0, 1.0], size=n)
        X += OFFSET * c[:, None]
        X += np.sqrt(NUGGET) * rng.standard_normal((n, self.m))
        return X / self.scale


class DecayGroup:
    """Full-rank Gaussian with correlation ``G diag(exp(-i rho)) G^T`` (normalised).

    ``rho = 0`` gives the identity; larger ``rho`` concentrates the variance
    on the leading directions of ``G``.
    """

    def __init__(self, rng, m: int):
        self.G, _ = np.linalg.qr(rng.standard_normal((m, m)))
        self.m = m

    def _factor(self, rho: float) -> np.ndarray:
        lam = np.exp(-rho * np.arange(1, self.m + 1))
        F = self.G * np.sqrt(lam)
        return F / np.sqrt((F ** 2).sum(axis=1))[:, None]

    def covariance(self, rho: float) -> np.ndarray:
        F = self._factor(rho)
        return F @ F.T

    def sample(self, rng, n: int, rho: float) -> np.ndarray:
        return rng.standard_normal((n, self.m)) @ self._factor(rho).T


class _Noise:
    def __init__(self, m):
        self.m = m

    def covariance(self):
        return None

    def sample(self, rng, n):
        return rng.standard_normal((n, self.m))


class _Bound:
    """A group bound to fixed extra sampling arguments."""

    def __init__(self, group, *args):
        self.group, self.args, self.m = group, args, group.m

    def covariance(self):
        return self.group.covariance(*self.args)

    def sample(self, rng, n):
        return self.group.sample(rng, n, *self.args)


def _pair(rng, m=25):
    return [MixtureGroup(rng, m), MixtureGroup(rng, m)]


def _layouts(spec: ToySpec):
    """Per-dataset lists of column generators, plus names and ground truth."""
    rng = np.random.default_rng([spec.seed, 0])
    N = _Noise
    if spec.problem == "newly_connected":
        shared, a_only, b_only = _pair(rng), _pair(rng), _pair(rng)
        layout = [[N(100), *shared, *a_only, N(50)], [N(100), *shared, N(50), *b_only]]
        truth = [range(150, 200), range(200, 250)]
        names = ["a", "b"]
    elif spec.problem == "split_groups":
        whole, a_rest = MixtureGroup(rng, 100), MixtureGroup(rng, 100)
        b_small, b_large = MixtureGroup(rng, 25), MixtureGroup(rng, 75)
        layout = [[whole, a_rest], [whole, b_small, b_large]]
        truth = [range(0), range(100, 200)]
        names = ["a", "b"]
    elif spec.problem == "split_both":
        a1, a2, a3 = MixtureGroup(rng, 75), MixtureGroup(rng, 25), MixtureGroup(rng, 100)
        b1, b2, b3 = MixtureGroup(rng, 100), MixtureGroup(rng, 25), MixtureGroup(rng, 75)
        layout = [[a1, a2, a3], [b1, b2, b3]]
        truth = [range(0, 100), range(100, 200)]
        names = ["a", "b"]
    elif spec.problem == "multi3":
        # regions of 50 after 100 noise columns; 1 = correlated in that dataset
        regions = [_pair(rng) for _ in range(6)]
        pattern = [[1, 1, 0, 1, 1, 0], [1, 0, 1, 1, 0, 0], [1, 1, 0, 0, 0, 1]]
        layout = []
        for pat in pattern:
            cols = [N(100)]
            for on, reg in zip(pat, regions):
                cols.extend(reg if on else [N(50)])
            layout.append(cols)
        truth = [range(300, 350), range(200, 250), range(350, 400)]
        names = ["a", "b", "c"]
    else:  # partial_corr
        shared = _pair(rng)
        varied = DecayGroup(rng, 50)
        layout = [[N(100), *shared, _Bound(varied, 1.0), N(50)],
                  [N(100), *shared, _Bound(varied, spec.rho), N(50)]]
        truth = [range(150, 200), range(0)]
        names = ["a", "b"]
    return layout, names, [np.array(t, dtype=int) for t in truth]


def generate(spec: ToySpec) -> ToyOutput:
    """Generate the datasets of ``spec`` with ground-truth differential features.

    Ground-truth sets are 0-based column indices.
    """
    layout, names, truth = _layouts(spec)
    datasets, blocks = [], []
    for m, cols in enumerate(layout):
        rng = np.random.default_rng([spec.seed, 1, m])
        parts, meta, start = [], [], 0
        for g in cols:
            parts.append(g.sample(rng, spec.n))
            meta.append(Block(start, start + g.m, g.covariance()))
            start += g.m
        datasets.append(DataMatrix(np.hstack(parts)))
        blocks.append(meta)
    return ToyOutput(datasets, truth, names, blocks)


def correlation_matrix(data) -> np.ndarray:
    """Pearson correlation between columns, with a unit diagonal.

    Constant columns have no defined correlation; their off-diagonal entries
    are set to 0 and a :class:`ConstantColumnWarning` is issued.
    """
    X = data.values if isinstance(data, DataMatrix) else np.asarray(data, dtype=np.float64)
    if X.shape[0] < 2:
        raise ParameterError("need at least two samples")
    Xc = X - X.mean(axis=0)
    sd = np.sqrt((Xc ** 2).sum(axis=0))
    const = sd == 0
    if const.any():
        warnings.warn(f"constant columns {np.flatnonzero(const).tolist()} get zero correlation",
                      ConstantColumnWarning, stacklevel=2)
    Z = Xc / np.where(const, 1.0, sd)
    C = Z.T @ Z
    C = np.clip(0.5 * (C + C.T), -1.0, 1.0)
    np.fill_diagonal(C, 1.0)
    return C


def constant_columns(data) -> np.ndarray:
    X = data.values if isinstance(data, DataMatrix) else np.asarray(data)
    return np.flatnonzero(np.ptp(X, axis=0) == 0)
