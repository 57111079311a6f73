"""Spectral bases, complement projectors and differential vectors.

The differential vectors of dataset A against dataset B are the leading right
singular vectors of ``M = P_A Q_B``, where ``P_A`` is A's random-walk matrix
and ``Q_B`` projects onto the orthogonal complement of the span of B's leading
right eigenvectors. The singular values measure how much of A's diffusion
structure survives once everything B can explain has been removed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .data_io import DataMatrix, align
from .errors import NumericError, ParameterError, ShapeError
from .feature_graph import FeatureGraph, KernelSpec, build_graph

GRAM_COND_LIMIT = 1e8
RANK_TOL = 1e-10
DEFAULT_D = 20
DEFAULT_R = 10


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so the entry of largest magnitude is positive.

    ``argmax`` returns the first maximiser, so ties go to the lowest index.
    """
    V = np.array(vectors, dtype=np.float64, copy=True)
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.where(V[idx, np.arange(V.shape[1])] < 0, -1.0, 1.0)
    return V * signs


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Leading right eigenvectors of ``P`` (unit columns), eigenvalues descending."""

    vectors: np.ndarray
    eigenvalues: np.ndarray

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True, eq=False)
class Projector:
    """Orthogonal projector ``Q`` onto the complement of a basis span.

    ``rank`` is the dimension of the removed subspace; ``dropped`` counts
    basis columns discarded as linearly dependent.
    """

    matrix: np.ndarray
    rank: int = 0
    dropped: int = 0

    @classmethod
    def identity(cls, p: int) -> "Projector":
        return cls(_frozen(np.eye(p)), 0, 0)


@dataclass(frozen=True, eq=False)
class DifferentialResult:
    """Differential vectors (columns of ``vectors``) and their significance."""

    vectors: np.ndarray
    significance: np.ndarray
    feature_ids: Optional[tuple] = None
    dropped_columns: int = 0

    @property
    def count(self) -> int:
        return self.significance.shape[0]


def leading_eigenvectors(graph: FeatureGraph, d: int) -> SpectralBasis:
    """Top-``d`` right eigenvectors of ``P = D^-1 W``.

    Solved through the symmetric matrix ``S = D^-1/2 W D^-1/2``, which shares
    its spectrum with ``P``; eigenvectors map back as ``u = D^-1/2 phi`` and
    are rescaled to unit Euclidean norm.
    """
    p = graph.size
    d = int(d)
    if not 0 <= d <= p:
        raise ParameterError(f"d={d} must satisfy 0 <= d <= p={p}")
    if d == 0:
        return SpectralBasis(_frozen(np.zeros((p, 0))), _frozen(np.zeros(0)))
    isq = 1.0 / np.sqrt(graph.degrees)
    S = graph.weights * np.multiply.outer(isq, isq)
    try:
        w, phi = sla.eigh(S, subset_by_index=[p - d, p - 1])
    except (sla.LinAlgError, ValueError) as exc:
        raise NumericError(f"symmetric eigensolver failed: {exc}") from exc
    order = np.argsort(-w, kind="stable")
    w, phi = w[order], phi[:, order]
    U = phi * isq[:, None]
    U /= np.linalg.norm(U, axis=0)
    return SpectralBasis(_frozen(fix_signs(U)), _frozen(w))


def orthonormal_span(U: np.ndarray, drop_dependent: bool = False) -> tuple[np.ndarray, int]:
    """Orthonormal basis of ``span(U)`` from a column-pivoted QR.

    With ``drop_dependent`` columns whose pivot falls below ``RANK_TOL``
    relative to the largest one are discarded; the count is returned.
    Otherwise, or for what remains, a Gram matrix ``U^T U`` with condition
    number above ``GRAM_COND_LIMIT`` is an error.
    """
    U = np.asarray(U, dtype=np.float64)
    p, d = U.shape
    if d == 0:
        return np.zeros((p, 0)), 0
    Qf, R, _ = sla.qr(U, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    keep = d
    if drop_dependent:
        keep = int(np.sum(diag > RANK_TOL * diag[0])) if diag[0] > 0 else 0
        if keep == 0:
            raise NumericError("basis is numerically zero")
    Rk = R[:keep, :keep]
    sv = sla.svdvals(Rk)
    cond = np.inf if sv[-1] == 0 else (sv[0] / sv[-1]) ** 2
    if not cond <= GRAM_COND_LIMIT:
        raise NumericError(
            f"Gram matrix of the eigenbasis is ill-conditioned (cond {cond:.3g} > {GRAM_COND_LIMIT:g}); "
            "try a smaller d"
        )
    return Qf[:, :keep], d - keep


def complement_projector(basis, drop_dependent: bool = False) -> Projector:
    """``Q = I - U (U^T U)^-1 U^T`` for a :class:`SpectralBasis` or a ``p x d`` array.

    The Gram inverse is never formed: with ``U = Q_r R`` (pivoted QR) the
    projector equals ``I - Q_r Q_r^T``.
    """
    U = basis.vectors if isinstance(basis, SpectralBasis) else np.asarray(basis, dtype=np.float64)
    if U.ndim != 2:
        raise ShapeError("basis must be a p x d matrix")
    p = U.shape[0]
    if U.shape[1] == 0:
        return Projector.identity(p)
    Qr, dropped = orthonormal_span(U, drop_dependent)
    G = Qr @ Qr.T
    Q = np.eye(p) - 0.5 * (G + G.T)
    return Projector(_frozen(Q), Qr.shape[1], dropped)


def _svd(M: np.ndarray):
    try:
        return sla.svd(M, lapack_driver="gesdd")
    except sla.LinAlgError:
        try:
            return sla.svd(M, lapack_driver="gesvd")
        except sla.LinAlgError as exc:
            raise NumericError(f"SVD did not converge: {exc}") from exc


def differential_vectors(p_own, q_other, r: int = DEFAULT_R) -> DifferentialResult:
    """Top-``r`` right singular triplets of ``M = P_own @ Q_other``.

    Parameters
    ----------
    p_own : FeatureGraph or ndarray
        Random-walk matrix of the dataset whose specific structure is sought.
    q_other : Projector or ndarray
        Complement projector built from the other dataset's eigenbasis.
    r : int
        Number of vectors to keep.
    """
    P = p_own.rw_matrix if isinstance(p_own, FeatureGraph) else np.asarray(p_own, dtype=np.float64)
    Q = q_other.matrix if isinstance(q_other, Projector) else np.asarray(q_other, dtype=np.float64)
    if P.shape != Q.shape or P.shape[0] != P.shape[1]:
        raise ShapeError(f"operator shapes disagree: P {P.shape}, Q {Q.shape}")
    p = P.shape[0]
    r = int(r)
    if not 0 <= r <= p:
        raise ParameterError(f"r={r} must satisfy 0 <= r <= p={p}")
    dropped = q_other.dropped if isinstance(q_other, Projector) else 0
    if r == 0:
        return DifferentialResult(_frozen(np.zeros((p, 0))), _frozen(np.zeros(0)), dropped_columns=dropped)
    _, s, vt = _svd(P @ Q)
    V = fix_signs(vt[:r].T)
    return DifferentialResult(_frozen(V), _frozen(s[:r]), dropped_columns=dropped)


def default_r(p: int) -> int:
    return min(DEFAULT_R, p)


def _check_d(d: int, p: int, name: str) -> int:
    d = int(d)
    if not 0 <= d <= p:
        raise ParameterError(f"{name}={d} must satisfy 0 <= {name} <= p={p}")
    return d


def disc_pair(a: DataMatrix, b: DataMatrix, d_a: int = DEFAULT_D, d_b: int = DEFAULT_D,
              r: Optional[int] = None, kernel: KernelSpec | None = None
              ) -> tuple[DifferentialResult, DifferentialResult]:
    """Differential vectors of A against B and of B against A.

    B's columns are reordered to A's feature order first. The two results
    are not mirror images: A's vectors come from ``P_A Q_B`` and B's from
    ``P_B Q_A``.
    """
    b = align(a, b).apply(b)
    p = a.feature_count
    d_a, d_b = _check_d(d_a, p, "d_a"), _check_d(d_b, p, "d_b")
    r = default_r(p) if r is None else r
    g_a, g_b = build_graph(a, kernel), build_graph(b, kernel)
    q_a = complement_projector(leading_eigenvectors(g_a, d_a))
    q_b = complement_projector(leading_eigenvectors(g_b, d_b))
    res_a = differential_vectors(g_a, q_b, r)
    res_b = differential_vectors(g_b, q_a, r)
    ids = a.feature_ids
    return (DifferentialResult(res_a.vectors, res_a.significance, ids, res_a.dropped_columns),
            DifferentialResult(res_b.vectors, res_b.significance, ids, res_b.dropped_columns))


def disc_multi(datasets: Sequence[DataMatrix], d=DEFAULT_D, r: Optional[int] = None,
               kernel: KernelSpec | None = None) -> list[DifferentialResult]:
    """Differential vectors of each dataset against the union of all the others.

    For dataset ``m`` the eigenbases of every other dataset are concatenated;
    numerically dependent columns of that concatenation are dropped and the
    count is reported in ``dropped_columns``.
    """
    datasets = list(datasets)
    M = len(datasets)
    if M < 2:
        raise ParameterError("need at least two datasets")
    ref = datasets[0]
    datasets = [ref] + [align(ref, x).apply(x) for x in datasets[1:]]
    p = ref.feature_count
    ds = [d] * M if np.isscalar(d) else list(d)
    if len(ds) != M:
        raise ParameterError(f"got {len(ds)} values of d for {M} datasets")
    ds = [_check_d(x, p, f"d[{i}]") for i, x in enumerate(ds)]
    r = default_r(p) if r is None else r
    graphs = [build_graph(x, kernel) for x in datasets]
    bases = [leading_eigenvectors(g, k).vectors for g, k in zip(graphs, ds)]
    out = []
    for m in range(M):
        others = np.hstack([bases[j] for j in range(M) if j != m])
        # a single other basis goes through the same path as disc_pair
        q = complement_projector(others, drop_dependent=M > 2)
        res = differential_vectors(graphs[m], q, r)
        out.append(DifferentialResult(res.vectors, res.significance, ref.feature_ids, q.dropped))
    return out


def generalized_cut_vectors(graph_a: FeatureGraph, graph_b: FeatureGraph, eps: float, r: int,
                            return_values: bool = False):
    """Generalized eigenvectors of ``L_B f = mu (L_A + eps I) f``.

    ``L = D - W`` is the unnormalized Laplacian. Returns the ``r`` vectors
    with the smallest non-trivial ``mu``, i.e. directions that are cheap to
    cut in B relative to A; the constant null vector of ``L_B`` is skipped.
    Vectors have unit Euclidean norm and the usual sign convention.
    """
    if not eps > 0:
        raise ParameterError("eps must be positive")
    p = graph_a.size
    if graph_b.size != p:
        raise ShapeError("graphs have different sizes")
    r = int(r)
    if not 0 <= r <= p - 1:
        raise ParameterError(f"r={r} must satisfy 0 <= r <= p-1={p - 1}")
    L_a = graph_a.laplacian() + eps * np.eye(p)
    L_b = graph_b.laplacian()
    try:
        mu, F = sla.eigh(L_b, L_a, subset_by_index=[1, r] if r else [1, 1])
    except (sla.LinAlgError, ValueError) as exc:
        raise NumericError(f"generalized eigensolve failed: {exc}") from exc
    mu, F = mu[:r], F[:, :r]
    F = fix_signs(F / np.linalg.norm(F, axis=0)) if r else np.zeros((p, 0))
    return (F, mu) if return_values else F
