"""Principal components over instruction distributions.

Centering only, no variance scaling; components come from a deterministic
SVD of the centered matrix with a fixed sign convention (largest-magnitude
entry of each component is positive) so that fitted models are bit-stable
across runs.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DimensionMismatch, EmptyCorpus
from .validation import as_float_matrix, as_float_vector, check_fitted


class InstructionPca(BaseEstimator, TransformerMixin):
    """Project fixed-length count vectors onto their top principal components.

    Fitted attributes: mean_ (n,), components_ (m, n) with orthonormal rows,
    explained_variance_ (m,) nonincreasing, n_features_in_, warnings_.
    """

    def __init__(self, n_components: int = 32):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = as_float_matrix(X)
        count, n = X.shape
        if count == 0:
            raise EmptyCorpus("cannot fit principal components on an empty corpus")
        self.warnings_ = []
        m = self.n_components
        if m > min(n, count):
            m = min(n, count)
            self.warnings_.append(
                f"n_components={self.n_components} clamped to {m} "
                f"({count} rows, {n} features)"
            )
        self.mean_ = X.mean(axis=0)
        centered = X - self.mean_
        _, singular_values, vt = np.linalg.svd(centered, full_matrices=False)
        components = vt[:m].copy()
        for row in components:
            pivot = np.argmax(np.abs(row))
            if row[pivot] < 0:
                row *= -1
        self.components_ = components
        denominator = max(count - 1, 1)
        self.explained_variance_ = np.maximum(singular_values[:m] ** 2 / denominator, 0.0)
        if not np.any(singular_values > 0):
            self.warnings_.append("degenerate input: zero total variance")
        self.n_features_in_ = n
        return self

    def transform(self, X) -> np.ndarray:
        check_fitted(self, "components_")
        X = as_float_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        return (X - self.mean_) @ self.components_.T

    def project(self, vec) -> np.ndarray:
        """Project a single distribution to its principal-component vector."""
        check_fitted(self, "components_")
        vec = as_float_vector(vec, length=self.n_features_in_, name="distribution")
        return self.components_ @ (vec - self.mean_)
