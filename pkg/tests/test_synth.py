import warnings

import numpy as np
import pytest

from disc.errors import ParameterError
from disc.synth import ConstantColumnWarning, ToySpec, constant_columns, correlation_matrix, generate


def test_newly_connected_ground_truth(toy_newly_connected):
    gt_a, gt_b = toy_newly_connected.ground_truth
    assert list(gt_a) == list(range(150, 200))
    assert list(gt_b) == list(range(200, 250))
    assert not set(gt_a) & set(gt_b)
    assert [d.shape for d in toy_newly_connected.datasets] == [(10000, 250)] * 2


@pytest.mark.parametrize("problem,p,count", [("newly_connected", 250, 2), ("split_groups", 200, 2),
                                             ("split_both", 200, 2), ("multi3", 400, 3),
                                             ("partial_corr", 250, 2)])
def test_shapes_and_shared_ids(problem, p, count):
    out = generate(ToySpec(problem, n=200, seed=1))
    assert len(out.datasets) == count
    for d in out.datasets:
        assert d.shape == (200, p)
        assert d.feature_ids == out.datasets[0].feature_ids
    for gt in out.ground_truth:
        assert all(0 <= i < p for i in gt)


def test_deterministic():
    a = generate(ToySpec("multi3", n=150, seed=9))
    b = generate(ToySpec("multi3", n=150, seed=9))
    for x, y in zip(a.datasets, b.datasets):
        assert np.array_equal(x.values, y.values)
    c = generate(ToySpec("multi3", n=150, seed=10))
    assert not np.array_equal(a.datasets[0].values, c.datasets[0].values)


def test_shared_block_has_same_covariance(toy_newly_connected):
    ba, bb = toy_newly_connected.blocks
    shared_a = [blk for blk in ba if blk.start in (100, 125)]
    shared_b = [blk for blk in bb if blk.start in (100, 125)]
    for x, y in zip(shared_a, shared_b):
        assert np.array_equal(x.covariance, y.covariance)


def test_split_groups_correlation(toy_split_groups):
    C = correlation_matrix(toy_split_groups.datasets[1])
    small, large = slice(100, 125), slice(125, 200)

    def mean_abs_offdiag(block):
        sub = np.abs(C[block, block])
        return (sub.sum() - np.trace(sub)) / (sub.size - sub.shape[0])

    assert mean_abs_offdiag(small) >= 0.3
    assert mean_abs_offdiag(large) >= 0.3
    assert np.abs(C[small, large]).mean() <= 0.1


def test_partial_corr_rho_zero_is_near_identity():
    out = generate(ToySpec("partial_corr", n=10000, seed=0, rho=0.0))
    C = correlation_matrix(out.datasets[1])[150:200, 150:200]
    assert np.abs(C - np.eye(50)).max() <= 0.05
    blk = [b for b in out.blocks[1] if b.start == 150][0]
    np.testing.assert_allclose(blk.covariance, np.eye(50), atol=1e-12)


def test_partial_corr_rho_one_matches_reference_dataset():
    out = generate(ToySpec("partial_corr", n=200, seed=0, rho=1.0))
    ca = [b for b in out.blocks[0] if b.start == 150][0].covariance
    cb = [b for b in out.blocks[1] if b.start == 150][0].covariance
    np.testing.assert_array_equal(ca, cb)


def test_target_covariances_have_unit_diagonal(toy_multi3):
    for blocks in toy_multi3.blocks:
        for blk in blocks:
            if blk.covariance is not None:
                np.testing.assert_allclose(np.diag(blk.covariance), 1.0, atol=1e-12)


def test_sample_covariance_converges(toy_newly_connected):
    for data, blocks in zip(toy_newly_connected.datasets, toy_newly_connected.blocks):
        X = data.values
        for blk in blocks:
            if blk.covariance is None:
                continue
            S = np.cov(X[:, blk.start:blk.stop], rowvar=False)
            m = blk.stop - blk.start
            assert np.linalg.norm(S - blk.covariance) <= 5 * 5 * m / np.sqrt(X.shape[0])
            # much tighter in practice
            assert np.abs(S - blk.covariance).max() <= 0.05


def test_spec_validation():
    with pytest.raises(ParameterError):
        ToySpec("toy9")
    with pytest.raises(ParameterError):
        ToySpec(n=50)
    with pytest.raises(ParameterError):
        ToySpec("partial_corr", rho=1.5)


def test_correlation_identical_columns():
    x = np.random.default_rng(0).standard_normal(50)
    C = correlation_matrix(np.c_[x, x])
    np.testing.assert_allclose(C, np.ones((2, 2)), atol=1e-12)


def test_correlation_independent_columns():
    X = np.random.default_rng(1).standard_normal((10000, 6))
    C = correlation_matrix(X)
    off = C[~np.eye(6, dtype=bool)]
    assert np.abs(off).max() <= 0.05
    assert np.all(np.diag(C) == 1.0)


def test_correlation_constant_column_flagged():
    X = np.c_[np.random.default_rng(2).standard_normal(20), np.full(20, 3.0)]
    with pytest.warns(ConstantColumnWarning):
        C = correlation_matrix(X)
    assert C[0, 1] == 0 and C[1, 0] == 0
    assert list(constant_columns(X)) == [1]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        correlation_matrix(np.random.default_rng(3).standard_normal((5, 3)))
