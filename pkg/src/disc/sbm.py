"""Stochastic block model experiments for recovering a differentiating block.

Graph A has blocks ``[l, l + s]`` and graph B splits the second block into
``[l, s]``, giving blocks ``alpha, beta, gamma`` of sizes ``[l, l, s]``.
Projecting A's two leading eigenvectors out of B and taking the leading
eigenvector of ``Q_A W_B Q_A`` should localise on ``gamma``. This module
samples such pairs, runs the recovery, and measures how the relevant
quantities scale with ``l`` when ``s = l ** alpha``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import ArpackError, LinearOperator, eigsh

from .errors import NumericError, ParameterError


def _seed_key(seed) -> list[int]:
    return [int(seed)] if np.isscalar(seed) else [int(x) for x in seed]


@dataclass(frozen=True)
class SbmSpec:
    """Block sizes, edge probabilities and seed (an int or a tuple of ints)."""

    block_sizes: tuple
    p_intra: float
    q_inter: float
    seed: object = 0

    def __post_init__(self):
        sizes = tuple(int(x) for x in self.block_sizes)
        if not sizes or min(sizes) < 1:
            raise ParameterError("block sizes must be positive")
        if not 0.0 <= self.q_inter < self.p_intra <= 1.0:
            raise ParameterError("need 0 <= q < p <= 1")
        object.__setattr__(self, "block_sizes", sizes)

    @property
    def size(self) -> int:
        return sum(self.block_sizes)

    def labels(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.block_sizes)), self.block_sizes)

    def theta(self) -> np.ndarray:
        k = len(self.block_sizes)
        return np.where(np.eye(k, dtype=bool), self.p_intra, self.q_inter)


@dataclass(frozen=True, eq=False)
class SbmInstance:
    adjacency: np.ndarray
    labels: np.ndarray
    spec: SbmSpec


@dataclass(frozen=True, eq=False)
class RecoveryReport:
    estimated_gamma: np.ndarray
    error_count: int
    error_rate: float
    vector: np.ndarray
    v_gamma_distance: float


class GammaEigenpair(NamedTuple):
    distance: float
    lambda3: float
    bound: float
    distance_bound: float

    @property
    def holds(self) -> bool:
        return self.lambda3 >= self.bound and self.distance <= self.distance_bound


def sample_sbm(spec: SbmSpec) -> SbmInstance:
    """Symmetric 0/1 adjacency with zero diagonal.

    Each block pair ``(a, b)`` draws from its own generator seeded with
    ``(seed, a, b)``, so two specs sharing a seed and leading block sizes
    share those leading blocks exactly.
    """
    sizes = spec.block_sizes
    starts = np.concatenate([[0], np.cumsum(sizes)])
    N = spec.size
    W = np.zeros((N, N))
    key = _seed_key(spec.seed)
    for a in range(len(sizes)):
        ra = slice(starts[a], starts[a + 1])
        for b in range(a, len(sizes)):
            rb = slice(starts[b], starts[b + 1])
            rng = np.random.default_rng(key + [a, b])
            prob = spec.p_intra if a == b else spec.q_inter
            draw = rng.random((sizes[a], sizes[b])) < prob
            if a == b:
                T = np.triu(draw, 1)
                W[ra, ra] = T | T.T
            else:
                W[ra, rb] = draw
                W[rb, ra] = draw.T
    return SbmInstance(W, spec.labels(), spec)


def expected_matrix(spec: SbmSpec) -> np.ndarray:
    """Block-constant ``E Theta E^T``; the diagonal keeps the intra-block value."""
    lab = spec.labels()
    return np.where(lab[:, None] == lab[None, :], spec.p_intra, spec.q_inter)


def block_eigenpairs(spec: SbmSpec):
    """Nonzero eigenpairs of ``expected_matrix(spec)`` without forming it.

    With ``Delta = diag(block sizes)`` the nonzero spectrum is that of
    ``Delta^1/2 Theta Delta^1/2``; an eigenvector ``y`` lifts to
    ``E Delta^-1/2 y``. Eigenvalues are returned in descending order.
    """
    n = np.asarray(spec.block_sizes, dtype=np.float64)
    h = np.sqrt(n)
    w, Y = sla.eigh(h[:, None] * spec.theta() * h[None, :])
    order = np.argsort(-w, kind="stable")
    w, Y = w[order], Y[:, order]
    V = (Y / h[:, None])[spec.labels()]
    return w, V


def _start_vector(N: int) -> np.ndarray:
    return np.random.default_rng([N, 17]).standard_normal(N)


def top_eigenpairs(A, k: int):
    """Largest-algebraic ``k`` eigenpairs of a symmetric matrix or operator."""
    N = A.shape[0]
    try:
        w, V = eigsh(A, k=k, which="LA", v0=_start_vector(N))
    except ArpackError as exc:
        raise NumericError(f"eigsh failed: {exc}") from exc
    order = np.argsort(-w, kind="stable")
    return w[order], V[:, order]


def projected_operator(M: np.ndarray, U: np.ndarray) -> LinearOperator:
    """``x -> Q M Q x`` with ``Q = I - U U^T`` (``U`` orthonormal), never formed."""
    def proj(x):
        return x - U @ (U.T @ x)

    def mv(x):
        return proj(M @ proj(np.ravel(x)))

    N = M.shape[0]
    return LinearOperator((N, N), matvec=mv, rmatvec=mv, dtype=np.float64)


def _gamma_indicator(l: int, s: int) -> np.ndarray:
    e = np.zeros(2 * l + s)
    e[2 * l:] = 1.0 / math.sqrt(s)
    return e


def _check_pair(w_a: SbmInstance, w_b: SbmInstance) -> tuple[int, int]:
    sa, sb = w_a.spec.block_sizes, w_b.spec.block_sizes
    if len(sa) != 2 or len(sb) != 3 or sb[0] != sb[1] or sa != (sb[0], sb[1] + sb[2]):
        raise ParameterError(f"expected A blocks [l, l+s] and B blocks [l, l, s]; got {list(sa)}, {list(sb)}")
    return sb[0], sb[2]


def recover_gamma(w_a: SbmInstance, w_b: SbmInstance, d: int = 2) -> RecoveryReport:
    """Estimate the block present in B but merged in A.

    ``Q_A`` removes A's top-``d`` adjacency eigenvectors; the leading
    eigenvector of ``Q_A W_B Q_A``, signed to have positive mean on the true
    block, is thresholded at ``1 / (2 sqrt(s))``.
    """
    l, s = _check_pair(w_a, w_b)
    _, U = top_eigenpairs(w_a.adjacency, d)
    _, v = top_eigenpairs(projected_operator(w_b.adjacency, U), 1)
    v = v[:, 0]
    truth = w_b.labels == 2
    if v[truth].mean() < 0:
        v = -v
    est = v > 1.0 / (2.0 * math.sqrt(s))
    errors = int(np.sum(est != truth))
    dist = float(np.linalg.norm(v - _gamma_indicator(l, s)))
    return RecoveryReport(np.flatnonzero(est), errors, errors / s, v, dist)


def gamma_eigenpair_check(l: int, s: int, p: float, q: float) -> GammaEigenpair:
    """Third eigenpair of the expected three-block matrix, by dense eigensolve.

    Returns the distance of ``v_gamma`` from ``e_gamma / sqrt(s)``, its
    eigenvalue, the eigenvalue bound ``(p - q) s`` and the distance bound
    ``sqrt(8 s / l)``.
    """
    E = expected_matrix(SbmSpec((l, l, s), p, q))
    N = E.shape[0]
    w, V = sla.eigh(E, subset_by_index=[N - 3, N - 1])
    lam3, v = w[0], V[:, 0]
    if v[2 * l:].mean() < 0:
        v = -v
    dist = float(np.linalg.norm(v - _gamma_indicator(l, s)))
    return GammaEigenpair(dist, float(lam3), (p - q) * s, math.sqrt(8.0 * s / l))


def gamma_size(l: int, alpha: float) -> int:
    return max(1, int(round(l ** alpha)))


def perturbation_norm(w_b: np.ndarray, spec_a: SbmSpec, spec_b: SbmSpec) -> float:
    """Spectral norm of ``Q_EB E_B Q_EB - Q_EA W_B Q_EA``.

    ``E_A``, ``E_B`` are the expected matrices and each ``Q`` removes the
    top two eigenvectors of its expected matrix. The first term equals
    ``lambda_3 v_3 v_3^T`` of ``E_B`` since ``E_B`` has rank three.
    """
    wb, Vb = block_eigenpairs(spec_b)
    _, Va = block_eigenpairs(spec_a)
    Ua = Va[:, :2] / np.linalg.norm(Va[:, :2], axis=0)
    v3 = Vb[:, 2] / np.linalg.norm(Vb[:, 2])
    lam3 = wb[2]
    inner = projected_operator(w_b, Ua)

    def mv(x):
        x = np.ravel(x)
        return lam3 * v3 * (v3 @ x) - inner.matvec(x)

    N = w_b.shape[0]
    op = LinearOperator((N, N), matvec=mv, rmatvec=mv, dtype=np.float64)
    try:
        w = eigsh(op, k=1, which="LM", v0=_start_vector(N), return_eigenvectors=False)
    except ArpackError as exc:
        raise NumericError(f"eigsh failed: {exc}") from exc
    return float(abs(w[0]))


def fit_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def numerator_theory(alpha: float) -> float:
    return max(0.5, 1.5 * alpha - 0.5)


def slope_experiment(l_grid: Sequence[int], alpha_grid: Sequence[float], p: float = 0.8,
                     q: float = 0.2, trials: int = 10, seed: int = 0):
    """Scaling of ``lambda_3(W_B)`` and of the perturbation norm with ``l``.

    For each ``alpha`` and ``l`` (with ``s = round(l ** alpha)``) every trial
    samples ``W_B`` from generator key ``(seed, l, trial, 1)``. The per-``l``
    trial means are fitted on a log-log scale.

    Returns
    -------
    slopes : list of dict
        Keys ``alpha, quantity, fitted_slope, theoretical_slope``.
    records : list of dict
        Keys ``alpha, l, trial, quantity, value``.
    """
    l_grid = [int(x) for x in l_grid]
    if len(l_grid) < 3:
        raise ParameterError("need at least three values of l to fit a slope")
    for a in alpha_grid:
        if not 0.5 < a < 1.0:
            raise ParameterError(f"alpha={a} must lie in (0.5, 1)")
    slopes, records = [], []
    for alpha in alpha_grid:
        means = {"lambda3": [], "numerator": []}
        for l in l_grid:
            s = gamma_size(l, alpha)
            spec_a = SbmSpec((l, l + s), p, q)
            vals = {"lambda3": [], "numerator": []}
            for t in range(trials):
                spec_b = SbmSpec((l, l, s), p, q, (seed, l, t, 1))
                W = sample_sbm(spec_b).adjacency
                vals["lambda3"].append(float(top_eigenpairs(W, 3)[0][2]))
                vals["numerator"].append(perturbation_norm(W, spec_a, spec_b))
                del W
                for name in vals:
                    records.append(dict(alpha=alpha, l=l, trial=t, quantity=name, value=vals[name][-1]))
            for name in means:
                means[name].append(float(np.mean(vals[name])))
        slopes.append(dict(alpha=alpha, quantity="lambda3",
                           fitted_slope=fit_slope(l_grid, means["lambda3"]), theoretical_slope=alpha))
        slopes.append(dict(alpha=alpha, quantity="numerator",
                           fitted_slope=fit_slope(l_grid, means["numerator"]),
                           theoretical_slope=numerator_theory(alpha)))
    return slopes, records


def recovery_experiment(l_grid: Sequence[int], alpha: float = 0.8, p: float = 0.8, q: float = 0.2,
                        trials: int = 20, seed: int = 0):
    """Mean recovery error rate per ``l``.

    Trial ``t`` samples A and B independently from keys ``(seed, l, t, 0)``
    and ``(seed, l, t, 1)``.

    Returns
    -------
    means : dict
        ``l -> mean error_rate``.
    records : list of dict
        Keys ``alpha, l, trial, error_rate, v_gamma_distance``.
    """
    means, records = {}, []
    for l in (int(x) for x in l_grid):
        s = gamma_size(l, alpha)
        rates = []
        for t in range(trials):
            a = sample_sbm(SbmSpec((l, l + s), p, q, (seed, l, t, 0)))
            b = sample_sbm(SbmSpec((l, l, s), p, q, (seed, l, t, 1)))
            rep = recover_gamma(a, b)
            del a, b
            rates.append(rep.error_rate)
            records.append(dict(alpha=alpha, l=l, trial=t, error_rate=rep.error_rate,
                                v_gamma_distance=rep.v_gamma_distance))
        means[l] = float(np.mean(rates))
    return means, records
