import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from macneto.errors import DimensionMismatch, EmptyCorpus
from macneto.pca import InstructionPca


def eig_oracle(X, m):
    """Brute-force covariance eigendecomposition, the independent route."""
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / max(len(X) - 1, 1)
    values, vectors = np.linalg.eigh(cov)
    order = np.argsort(values)[::-1]
    return mean, vectors[:, order[:m]].T, values[order[:m]]


def assert_components_match(components, oracle_components, tol=1e-8):
    assert components.shape == oracle_components.shape
    for got, want in zip(components, oracle_components):
        direct = np.abs(got - want).max()
        flipped = np.abs(got + want).max()
        assert min(direct, flipped) <= tol


def test_collinear_points_force_direction():
    X = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    pca = InstructionPca(2).fit(X)
    assert np.allclose(pca.components_[0], [1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-12)
    assert pca.explained_variance_[1] <= 1e-24


def test_repeated_row_is_degenerate_not_fatal():
    X = np.tile([3.0, 4.0, 5.0], (4, 1))
    pca = InstructionPca(1).fit(X)
    assert np.allclose(pca.explained_variance_, [0.0])
    assert np.allclose(pca.transform(X), 0.0)
    assert any("degenerate" in w for w in pca.warnings_)


def test_matches_eigendecomposition_oracle():
    rng = np.random.default_rng(42)
    for _ in range(20):
        X = rng.integers(0, 30, size=(10, 6)).astype(float)
        pca = InstructionPca(3).fit(X)
        mean, comps, variances = eig_oracle(X, 3)
        assert np.abs(pca.mean_ - mean).max() <= 1e-8
        assert_components_match(pca.components_, comps)
        assert np.abs(pca.explained_variance_ - variances).max() <= 1e-8


def test_orthonormal_and_ordered():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(40, 12))
    pca = InstructionPca(8).fit(X)
    gram = pca.components_ @ pca.components_.T
    assert np.abs(gram - np.eye(8)).max() <= 1e-8
    assert (np.diff(pca.explained_variance_) <= 1e-12).all()


def test_projection_is_affine():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(20, 9))
    pca = InstructionPca(4).fit(X)
    a, b = rng.normal(size=9), rng.normal(size=9)
    lhs = pca.project(a) - pca.project(b)
    rhs = pca.components_ @ (a - b)
    assert np.abs(lhs - rhs).max() <= 1e-10


def test_mean_projects_to_zero():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(15, 5))
    pca = InstructionPca(3).fit(X)
    assert np.abs(pca.project(pca.mean_)).max() <= 1e-10


def test_full_rank_reconstruction():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(30, 6))
    pca = InstructionPca(6).fit(X)
    Z = pca.transform(X)
    back = Z @ pca.components_ + pca.mean_
    assert np.abs(back - X).max() <= 1e-8


def test_deterministic_fit():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(25, 7))
    one = InstructionPca(4).fit(X)
    two = InstructionPca(4).fit(X.copy())
    assert np.array_equal(one.components_, two.components_)
    assert np.array_equal(one.explained_variance_, two.explained_variance_)


def test_identical_inputs_identical_pcvs():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(12, 6))
    pca = InstructionPca(4).fit(X)
    v = X[3]
    assert np.array_equal(pca.project(v), pca.project(v.copy()))


def test_component_clamp_records_warning():
    X = np.random.default_rng(13).normal(size=(5, 8))
    pca = InstructionPca(32).fit(X)
    assert pca.components_.shape[0] == 5
    assert any("clamped" in w for w in pca.warnings_)


def test_errors():
    with pytest.raises(EmptyCorpus):
        InstructionPca(2).fit(np.empty((0, 4)))
    pca = InstructionPca(2).fit(np.random.default_rng(1).normal(size=(6, 4)))
    with pytest.raises(DimensionMismatch):
        pca.transform(np.zeros((2, 5)))
    with pytest.raises(DimensionMismatch):
        pca.project(np.zeros(5))
    with pytest.raises(NotFittedError):
        InstructionPca(2).transform(np.zeros((1, 4)))


def test_sign_convention_largest_entry_positive():
    rng = np.random.default_rng(14)
    X = rng.normal(size=(30, 10))
    pca = InstructionPca(5).fit(X)
    for row in pca.components_:
        assert row[np.argmax(np.abs(row))] > 0
