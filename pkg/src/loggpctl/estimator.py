"""scikit-learn interface to the local-GP tree."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .gp_exact import Hyperparameters
from .loggp import RpropConfig, VectorPredictor
from .validation import check_targets

__all__ = ["LoGGPRegressor"]


class LoGGPRegressor(RegressorMixin, BaseEstimator):
    """Streaming regressor backed by one :class:`~loggpctl.loggp.LogGpTree` per output.

    ``fit`` starts from an empty model and inserts the rows in order,
    ``partial_fit`` keeps the current trees and appends.  Insertion order
    matters (splits and hyperparameter steps depend on it), so the estimator
    is deterministic only for a fixed ``random_state`` and row order.

    Parameters
    ----------
    max_points : int
        Leaf capacity.
    overlap_ratio : float
        Routing overlap as a fraction of the split dimension's range.
    sigma_f : float
        Initial signal std.
    lengthscales : float, array-like or None
        Initial lengthscales; ``None`` uses half of each feature's range in
        the first batch (1.0 for constant features).
    sigma_on : float
        Initial noise std.
    adapt : bool
        One RPROP step per insertion.
    optimize_noise : bool
        Adapt ``sigma_on`` as well.
    random_state : int, Generator or None
        Routing randomness.

    Attributes
    ----------
    predictor_ : VectorPredictor
    n_features_in_ : int
    n_outputs_ : int
    """

    def __init__(self, max_points=100, overlap_ratio=0.1, sigma_f=1.0, lengthscales=None, sigma_on=0.1,
                 adapt=True, optimize_noise=True, random_state=None):
        self.max_points = max_points
        self.overlap_ratio = overlap_ratio
        self.sigma_f = sigma_f
        self.lengthscales = lengthscales
        self.sigma_on = sigma_on
        self.adapt = adapt
        self.optimize_noise = optimize_noise
        self.random_state = random_state

    def _initial_lengthscales(self, X):
        if self.lengthscales is None:
            span = X.max(axis=0) - X.min(axis=0) if len(X) else np.zeros(X.shape[1])
            return np.where(span > 0, 0.5 * span, 1.0)
        ls = np.broadcast_to(np.asarray(self.lengthscales, dtype=float), (X.shape[1],)).copy()
        if np.any(ls <= 0):
            raise ValueError("lengthscales must be positive")
        return ls

    def _init_predictor(self, X, n_outputs):
        hp = Hyperparameters(float(self.sigma_f), self._initial_lengthscales(X), float(self.sigma_on))
        self.predictor_ = VectorPredictor.create(
            n_outputs, X.shape[1], seed=self.random_state, init_hyper=hp, max_points=int(self.max_points),
            overlap_ratio=float(self.overlap_ratio), adapt=bool(self.adapt),
            optimize_noise=bool(self.optimize_noise), rprop=RpropConfig(),
        )
        self.n_outputs_ = n_outputs
        self._y_1d = None

    def _insert(self, X, Y):
        for x, y in zip(X, Y):
            self.predictor_.update_vector(x, y)

    def fit(self, X, y):
        """Reset and insert every row of ``(X, y)`` in order."""
        X, y = validate_data(self, X, y, multi_output=True, y_numeric=True)
        Y = check_targets(y, X.shape[0])
        self._init_predictor(X, Y.shape[1])
        self._y_1d = y.ndim == 1
        self._insert(X, Y)
        return self

    def partial_fit(self, X, y):
        """Insert more rows into the existing model (fits from scratch on first call)."""
        if not hasattr(self, "predictor_"):
            return self.fit(X, y)
        X, y = validate_data(self, X, y, multi_output=True, y_numeric=True, reset=False)
        Y = check_targets(y, X.shape[0])
        if Y.shape[1] != self.n_outputs_:
            raise ValueError(f"y has {Y.shape[1]} outputs, the model has {self.n_outputs_}")
        self._insert(X, Y)
        return self

    def predict(self, X):
        """Mixture-of-experts posterior mean, shape ``(n,)`` for 1-D targets else ``(n, n_outputs)``."""
        check_is_fitted(self, "predictor_")
        X = validate_data(self, X, reset=False)
        out = np.array([self.predictor_.predict_vector(x) for x in X]).reshape(X.shape[0], self.n_outputs_)
        return out[:, 0] if self._y_1d else out

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.target_tags.multi_output = True
        return tags
