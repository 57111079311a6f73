import math

import numpy as np
import pytest

from disc.data_io import DataMatrix
from disc.errors import DegenerateInputError, ParameterError
from disc.feature_graph import (FIXED, KernelSpec, build_graph, default_knn, self_tuning_sigmas,
                                standardize)

E1 = 0.36787944117144233  # exp(-1)


def test_identical_columns_fixed_kernel():
    g = build_graph(DataMatrix(np.array([[1.0, 1.0], [2.0, 2.0]])), KernelSpec(FIXED, bandwidth=1.0))
    np.testing.assert_array_equal(g.weights, [[1, 1], [1, 1]])
    np.testing.assert_array_equal(g.rw_matrix, [[0.5, 0.5], [0.5, 0.5]])


def test_three_equidistant_columns():
    # columns e_i / sqrt(2) are at mutual distance 1
    X = np.eye(3) / math.sqrt(2)
    g = build_graph(DataMatrix(X), KernelSpec(FIXED, bandwidth=1.0))
    expected_w = np.where(np.eye(3, dtype=bool), 1.0, E1)
    np.testing.assert_allclose(g.weights, expected_w, rtol=0, atol=1e-15)
    # hand-computed: diagonal 1/(1+2e^-1), off-diagonal e^-1/(1+2e^-1)
    np.testing.assert_allclose(np.diag(g.rw_matrix), 0.5761168847658291, atol=1e-15)
    np.testing.assert_allclose(g.rw_matrix[0, 1], 0.21194155761708544, atol=1e-15)
    np.testing.assert_allclose(g.rw_matrix.sum(1), 1.0, atol=1e-12)


def test_toy1_row_stochastic(toy_newly_connected):
    a = toy_newly_connected.datasets[0]
    g = build_graph(a)
    assert g.size == 250
    assert np.max(np.abs(g.rw_matrix.sum(1) - 1)) <= 1e-12
    assert len(g.bandwidths) == 250


def test_sigmas_on_a_line():
    X = np.array([[0.0, 1.0, 3.0], [0.0, 0.0, 0.0]])
    np.testing.assert_array_equal(self_tuning_sigmas(DataMatrix(X), 1), [1.0, 1.0, 2.0])
    np.testing.assert_array_equal(self_tuning_sigmas(DataMatrix(X), 2), [3.0, 2.0, 3.0])


def test_sigma_fallback_for_duplicates():
    X = np.array([[0.0, 0.0, 0.0, 2.0], [0.0, 0.0, 0.0, 0.0]])
    # the three coincident columns have zero distance to their first two neighbours
    s = self_tuning_sigmas(DataMatrix(X), 1)
    np.testing.assert_array_equal(s, [2.0, 2.0, 2.0, 2.0])


def test_all_identical_columns_is_degenerate():
    with pytest.raises(DegenerateInputError):
        self_tuning_sigmas(DataMatrix(np.ones((4, 3))), 1)
    with pytest.raises(DegenerateInputError):
        build_graph(DataMatrix(np.ones((4, 3))))


@pytest.mark.parametrize("k", [0, 3, 10])
def test_sigma_k_out_of_range(k):
    with pytest.raises(ParameterError):
        self_tuning_sigmas(DataMatrix(np.random.default_rng(0).random((4, 3))), k)


def test_default_k():
    assert default_knn(250) == 6
    assert default_knn(784) == 7
    assert default_knn(2) == 1
    assert KernelSpec().resolve_k(250) == 6


def test_kernel_spec_validation():
    with pytest.raises(ParameterError):
        KernelSpec(FIXED)
    with pytest.raises(ParameterError):
        KernelSpec(FIXED, bandwidth=-1.0)
    with pytest.raises(ParameterError):
        KernelSpec("cosine")
    with pytest.raises(ParameterError):
        KernelSpec(knn_k=5).resolve_k(5)


def test_self_tuning_weights_formula(rng):
    X = rng.standard_normal((30, 8))
    g = build_graph(DataMatrix(X), KernelSpec(knn_k=2))
    sig = self_tuning_sigmas(DataMatrix(X), 2)
    i, j = 1, 6
    d2 = np.sum((X[:, i] - X[:, j]) ** 2)
    assert g.weights[i, j] == pytest.approx(math.exp(-d2 / (sig[i] * sig[j])), rel=1e-12)


def test_graph_invariants(rng):
    for _ in range(5):
        X = rng.standard_normal((40, 25)) * rng.uniform(0.5, 3, 25)
        g = build_graph(DataMatrix(X))
        W = g.weights
        assert np.array_equal(W, W.T)
        assert np.all(np.diag(W) == 1.0)
        assert W.min() >= 0 and W.max() <= 1
        assert np.max(np.abs(g.rw_matrix.sum(1) - 1)) <= 1e-12
        ev = np.linalg.eigvals(g.rw_matrix)
        assert np.max(np.abs(ev.imag)) <= 1e-9
        assert ev.real.min() >= -1 - 1e-12 and ev.real.max() <= 1 + 1e-9


def test_graph_arrays_are_read_only(rng):
    g = build_graph(DataMatrix(rng.standard_normal((10, 4))))
    with pytest.raises(ValueError):
        g.weights[0, 0] = 2.0


def test_permutation_equivariance_exact(rng):
    X = rng.standard_normal((50, 30))
    perm = rng.permutation(30)
    g = build_graph(DataMatrix(X))
    h = build_graph(DataMatrix(X[:, perm]))
    assert np.array_equal(h.weights, g.weights[np.ix_(perm, perm)])
    assert np.array_equal(h.rw_matrix, g.rw_matrix[np.ix_(perm, perm)])


def test_laplacian_rows_sum_to_zero(rng):
    g = build_graph(DataMatrix(rng.standard_normal((10, 6))))
    np.testing.assert_allclose(g.laplacian().sum(1), 0, atol=1e-12)


def test_standardize():
    X = np.array([[1.0, 5.0, 2.0], [3.0, 5.0, 4.0], [5.0, 5.0, 9.0]])
    Z = standardize(DataMatrix(X, ("a", "b", "c"))).values
    np.testing.assert_allclose(Z.mean(0), 0, atol=1e-15)
    np.testing.assert_allclose(Z.std(0), [1, 0, 1])
