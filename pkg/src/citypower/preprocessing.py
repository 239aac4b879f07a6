"""Min-max scaling of features and target onto [-1, 1]."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, validate_data

from .exceptions import EmptySet


class MinMaxNormalizer(TransformerMixin, BaseEstimator):
    """Affine map of every column onto [-1, 1] using training min/max.

    Constant columns (max == min) map to 0 and invert back to the constant.
    Values outside the fitted range are extrapolated, not clipped. When
    ``fit`` receives ``y`` the target gets its own range, used by
    :meth:`transform_target` and :meth:`inverse_transform_target`.
    """

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=np.float64, ensure_all_finite=True)
        if X.shape[0] == 0:
            raise EmptySet("cannot fit normalizer on zero rows")
        self.data_min_ = X.min(axis=0)
        self.data_max_ = X.max(axis=0)
        if y is not None:
            y = check_array(y, ensure_2d=False, dtype=np.float64).ravel()
            self.target_min_ = float(y.min())
            self.target_max_ = float(y.max())
        return self

    @property
    def constant_(self) -> np.ndarray:
        check_is_fitted(self)
        return self.data_max_ == self.data_min_

    @property
    def target_constant_(self) -> bool:
        check_is_fitted(self, "target_min_")
        return self.target_max_ == self.target_min_

    @staticmethod
    def _forward(v, lo, hi):
        span = hi - lo
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, 2.0 * (v - lo) / safe - 1.0, 0.0)

    @staticmethod
    def _backward(z, lo, hi):
        span = hi - lo
        return np.where(span > 0, (z + 1.0) * 0.5 * span + lo, lo)

    def transform(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return self._forward(X, self.data_min_, self.data_max_)

    def inverse_transform(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=np.float64)
        return self._backward(X, self.data_min_, self.data_max_)

    def transform_target(self, y):
        check_is_fitted(self, "target_min_")
        y = np.asarray(y, dtype=np.float64)
        return self._forward(y, self.target_min_, self.target_max_)

    def inverse_transform_target(self, z):
        check_is_fitted(self, "target_min_")
        z = np.asarray(z, dtype=np.float64)
        return self._backward(z, self.target_min_, self.target_max_)

    def out_of_range(self, X) -> np.ndarray:
        """Boolean mask of rows with any feature outside the fitted range."""
        check_is_fitted(self)
        X = np.asarray(X, dtype=np.float64)
        return ((X < self.data_min_) | (X > self.data_max_)).any(axis=1)

    def to_dict(self) -> dict:
        check_is_fitted(self)
        doc = {"feature_min": self.data_min_.tolist(), "feature_max": self.data_max_.tolist()}
        if hasattr(self, "target_min_"):
            doc["target_min"] = self.target_min_
            doc["target_max"] = self.target_max_
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> MinMaxNormalizer:
        norm = cls()
        norm.data_min_ = np.array(doc["feature_min"], dtype=np.float64)
        norm.data_max_ = np.array(doc["feature_max"], dtype=np.float64)
        norm.n_features_in_ = norm.data_min_.shape[0]
        if "target_min" in doc:
            norm.target_min_ = float(doc["target_min"])
            norm.target_max_ = float(doc["target_max"])
        return norm


def fit_normalizer(data, ids) -> MinMaxNormalizer:
    """Fit feature and target ranges over exactly the rows named by ``ids``."""
    idx = data.rows(ids)
    if len(idx) == 0:
        raise EmptySet("fit_normalizer needs at least one id")
    return MinMaxNormalizer().fit(data.X[idx], data.y[idx])
