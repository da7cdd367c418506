"""Componentwise min-max scaling onto [-1, 1]."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, OneToOneFeatureMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted


class RangeScaler(OneToOneFeatureMixin, TransformerMixin, BaseEstimator):
    """Map each column affinely so its observed min goes to -1 and max to +1.

    Columns with max == min are sent to 0 (and back to the constant on
    inversion) instead of dividing by zero.

    Attributes
    ----------
    data_min_, data_max_ : ndarray of shape (n_features,)
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.data_min_ = X.min(axis=0)
        self.data_max_ = X.max(axis=0)
        self.n_features_in_ = X.shape[1]
        return self

    @property
    def _span(self):
        span = self.data_max_ - self.data_min_
        return np.where(span > 0, span, 1.0), span > 0

    def _check(self, X):
        check_is_fitted(self, "data_min_")
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X2 = np.atleast_2d(X)
        if X2.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X2.shape[1]}")
        return X2, single

    def transform(self, X):
        X2, single = self._check(X)
        span, varying = self._span
        out = np.where(varying, 2.0 * (X2 - self.data_min_) / span - 1.0, 0.0)
        return out[0] if single else out

    def inverse_transform(self, X):
        X2, single = self._check(X)
        span, varying = self._span
        out = np.where(varying, (X2 + 1.0) * 0.5 * span + self.data_min_, self.data_min_)
        return out[0] if single else out

    def to_dict(self) -> dict:
        return {"min": self.data_min_.tolist(), "max": self.data_max_.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "RangeScaler":
        s = cls()
        s.data_min_ = np.asarray(d["min"], dtype=float)
        s.data_max_ = np.asarray(d["max"], dtype=float)
        s.n_features_in_ = s.data_min_.size
        return s


# Name used for the fitted min/max record in the rest of the package.
ScalingSpec = RangeScaler


def fit_scaler(vectors) -> RangeScaler:
    return RangeScaler().fit(np.atleast_2d(np.asarray(vectors, dtype=float)))


def apply_scaler(spec: RangeScaler, vector):
    return spec.transform(vector)


def invert_scaler(spec: RangeScaler, vector):
    return spec.inverse_transform(vector)
