"""scikit-learn compatible wrappers around the LM-trained network."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, clone
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .network import NetworkShape, forward, init_params, tansig, unflatten
from .scaling import RangeScaler
from .training import lm_train


def _as_2d_targets(y) -> tuple[np.ndarray, bool]:
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        return y[:, None], True
    return y, False


class LMNetworkRegressor(RegressorMixin, BaseEstimator):
    """One-hidden-layer tansig network trained by Levenberg-Marquardt.

    Inputs and targets are min-max scaled to [-1, 1] on the whole dataset
    given to :meth:`fit`; the data is then split at random into training and
    validation parts, and training keeps the parameters with the lowest
    validation loss.

    Parameters
    ----------
    hidden_layer_size : int, default=10
    max_epochs : int, default=1000
    max_fail : int, default=6
        Consecutive validation-loss increases tolerated before stopping.
    validation_fraction : float, default=0.3
    mu, mu_dec, mu_inc, mu_max : float
        Initial damping and its adaptation schedule.
    random_state : int or None
        Seeds both the train/validation split and weight initialisation.
    """

    def __init__(
        self,
        hidden_layer_size: int = 10,
        max_epochs: int = 1000,
        max_fail: int = 6,
        validation_fraction: float = 0.3,
        mu: float = 1e-3,
        mu_dec: float = 0.1,
        mu_inc: float = 10.0,
        mu_max: float = 1e10,
        random_state=None,
    ):
        self.hidden_layer_size = hidden_layer_size
        self.max_epochs = max_epochs
        self.max_fail = max_fail
        self.validation_fraction = validation_fraction
        self.mu = mu
        self.mu_dec = mu_dec
        self.mu_inc = mu_inc
        self.mu_max = mu_max
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True, dtype=np.float64)
        Y, self._single_output = _as_2d_targets(y)
        if X.shape[0] < 2:
            raise ValueError("need at least two samples to train")
        self.n_features_in_ = X.shape[1]
        self.shape_ = NetworkShape(X.shape[1], int(self.hidden_layer_size), Y.shape[1])
        self.x_scaler_ = RangeScaler().fit(X)
        self.y_scaler_ = RangeScaler().fit(Y)
        Xs = self.x_scaler_.transform(X)
        Ys = self.y_scaler_.transform(Y)

        rng = np.random.default_rng(self.random_state)
        order = rng.permutation(X.shape[0])
        n_val = int(round(self.validation_fraction * X.shape[0]))
        n_val = min(n_val, X.shape[0] - 1)
        val, train = order[:n_val], order[n_val:]
        theta0 = init_params(self.shape_, rng)
        self.params_, self.training_log_ = lm_train(
            theta0,
            self.shape_,
            Xs[train],
            Ys[train],
            Xs[val],
            Ys[val],
            max_epochs=self.max_epochs,
            max_fail=self.max_fail,
            mu=self.mu,
            mu_dec=self.mu_dec,
            mu_inc=self.mu_inc,
            mu_max=self.mu_max,
        )
        self.train_indices_ = np.sort(train)
        return self

    def predict_scaled(self, X) -> np.ndarray:
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        return forward(self.params_, self.x_scaler_.transform(X), self.shape_)

    def predict(self, X):
        out = self.y_scaler_.inverse_transform(self.predict_scaled(X))
        return out[:, 0] if self._single_output else out


def _fit_member(template: LMNetworkRegressor, X, y):
    return clone(template).fit(X, y)


class LMEnsembleRegressor(RegressorMixin, BaseEstimator):
    """Average of independently trained :class:`LMNetworkRegressor` members.

    Every member gets its own seed (derived from ``random_state``), so both
    the train/validation split and the initial weights differ. Members are
    de-scaled to physical units before averaging; ``predict(..., return_std=True)``
    also returns the sample standard deviation across members (ddof=1).
    """

    def __init__(
        self,
        n_estimators: int = 10,
        hidden_layer_size: int = 10,
        max_epochs: int = 1000,
        max_fail: int = 6,
        validation_fraction: float = 0.3,
        mu: float = 1e-3,
        mu_dec: float = 0.1,
        mu_inc: float = 10.0,
        mu_max: float = 1e10,
        random_state: int = 0,
        n_jobs: int | None = None,
    ):
        self.n_estimators = n_estimators
        self.hidden_layer_size = hidden_layer_size
        self.max_epochs = max_epochs
        self.max_fail = max_fail
        self.validation_fraction = validation_fraction
        self.mu = mu
        self.mu_dec = mu_dec
        self.mu_inc = mu_inc
        self.mu_max = mu_max
        self.random_state = random_state
        self.n_jobs = n_jobs

    def member_seeds(self) -> list[int]:
        seq = np.random.SeedSequence(int(self.random_state))
        return [int(s) for s in seq.generate_state(int(self.n_estimators))]

    def _template(self) -> LMNetworkRegressor:
        return LMNetworkRegressor(
            hidden_layer_size=self.hidden_layer_size,
            max_epochs=self.max_epochs,
            max_fail=self.max_fail,
            validation_fraction=self.validation_fraction,
            mu=self.mu,
            mu_dec=self.mu_dec,
            mu_inc=self.mu_inc,
            mu_max=self.mu_max,
        )

    def fit(self, X, y):
        if self.n_estimators < 2:
            raise ValueError("an ensemble needs at least 2 members for the spread to be defined")
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True, dtype=np.float64)
        self.n_features_in_ = X.shape[1]
        self._single_output = np.asarray(y).ndim == 1
        self.seeds_ = self.member_seeds()
        templates = [self._template().set_params(random_state=s) for s in self.seeds_]
        jobs = self.n_jobs or 1
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                self.estimators_ = list(pool.map(_fit_member, templates, [X] * len(templates), [y] * len(templates)))
        else:
            self.estimators_ = [_fit_member(t, X, y) for t in templates]
        return self

    def _stacked(self):
        """Member weights with the scalers folded in, stacked along axis 0.

        Input scaling ``2 (x - min) / span - 1`` is absorbed into the first
        layer and output de-scaling into the second, so the whole ensemble
        evaluates in a handful of array operations.
        """
        cached = getattr(self, "_stack_cache", None)
        if cached is not None and cached[0] is self.estimators_:
            return cached[1]
        W1s, b1s, W2s, b2s = [], [], [], []
        for est in self.estimators_:
            p = unflatten(est.params_, est.shape_)
            xs, ys = est.x_scaler_, est.y_scaler_
            xspan, xvar = xs._span
            gain = np.where(xvar, 2.0 / xspan, 0.0)
            offset = np.where(xvar, -2.0 * xs.data_min_ / xspan - 1.0, 0.0)
            yspan, yvar = ys._span
            half = np.where(yvar, 0.5 * yspan, 0.0)
            W1s.append(p.W1 * gain)
            b1s.append(p.b1 + p.W1 @ offset)
            W2s.append(half[:, None] * p.W2)
            b2s.append(np.where(yvar, half * (p.b2 + 1.0) + ys.data_min_, ys.data_min_))
        stack = tuple(np.stack(a) for a in (W1s, b1s, W2s, b2s))
        self._stack_cache = (self.estimators_, stack)
        return stack

    def member_predictions(self, X) -> np.ndarray:
        """Physical-unit predictions, shape ``(n_members, n_samples, n_outputs)``."""
        check_is_fitted(self, "estimators_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        W1, b1, W2, b2 = self._stacked()
        hidden = tansig(np.matmul(W1, X.T) + b1[:, :, None])  # (R, d2, N)
        out = np.matmul(W2, hidden) + b2[:, :, None]  # (R, d3, N)
        return out.transpose(0, 2, 1)

    def predict(self, X, return_std: bool = False):
        preds = self.member_predictions(X)
        mean = preds.mean(axis=0)
        std = preds.std(axis=0, ddof=1)
        if self._single_output:
            mean, std = mean[:, 0], std[:, 0]
        return (mean, std) if return_std else mean

    @property
    def training_logs_(self):
        return [est.training_log_ for est in self.estimators_]


# Functional entry points ---------------------------------------------------


def train(X, Y, n_hidden: int = 10, seed: int = 0, **hyper) -> LMNetworkRegressor:
    """Train a single network (scaling, 70/30 split, LM, early stopping)."""
    return LMNetworkRegressor(hidden_layer_size=n_hidden, random_state=seed, **hyper).fit(X, Y)


def train_ensemble(
    X, Y, n_hidden: int = 10, n_r: int = 10, base_seed: int = 0, n_jobs: int | None = None, **hyper
) -> LMEnsembleRegressor:
    return LMEnsembleRegressor(
        n_estimators=n_r, hidden_layer_size=n_hidden, random_state=base_seed, n_jobs=n_jobs, **hyper
    ).fit(X, Y)


def predict_ensemble(ensemble: LMEnsembleRegressor, x) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble mean and per-component spread for one input vector or a batch."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    mean, std = ensemble.predict(np.atleast_2d(x), return_std=True)
    if ensemble._single_output:
        mean, std = mean[:, None], std[:, None]
    return (mean[0], std[0]) if single else (mean, std)
