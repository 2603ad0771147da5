"""scikit-learn style estimator for regularized nonlinear regression.

``RegularizedNLSRegressor`` fits the parameters ``theta`` of a user model
``model(X, theta)`` by minimizing ``1/2 ||model(X, theta) - y||^2 + h(theta)``
with one of the derivative-free solvers.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import dfolsr, smoothing
from .regularizers import parse_regularizer


class RegularizedNLSRegressor(RegressorMixin, BaseEstimator):
    """Derivative-free fit of ``theta`` in ``y ~ model(X, theta)``.

    Parameters
    ----------
    model : callable
        ``model(X, theta) -> (n_samples,)`` predictions.
    theta0 : array-like
        Starting parameters; also fixes their number.
    regularizer : str or Regularizer
        ``zero``, ``l1:<lambda>``, ``ball:<r>`` or ``box:<lo>,<hi>``.
    solver : {"dfolsr", "dfolssr"}
    max_evals : int or None
        Evaluation budget; ``None`` means ``100 (p + 1)`` for ``p`` parameters.
    config : SolverConfig or None
    """

    def __init__(self, model=None, theta0=None, regularizer="l1:1", solver="dfolsr",
                 max_evals=None, config=None):
        self.model = model
        self.theta0 = theta0
        self.regularizer = regularizer
        self.solver = solver
        self.max_evals = max_evals
        self.config = config

    def _residual(self, X, y):
        def residual(theta):
            return np.asarray(self.model(X, theta), dtype=float).ravel() - y
        return residual

    def fit(self, X, y):
        if self.model is None or self.theta0 is None:
            raise ValueError("model and theta0 are required")
        if self.solver not in ("dfolsr", "dfolssr"):
            raise ValueError(f"unknown solver {self.solver!r}")
        X, y = check_X_y(X, y, y_numeric=True)
        theta0 = np.asarray(self.theta0, dtype=float).ravel()
        h = parse_regularizer(self.regularizer)
        base = self.config or dfolsr.SolverConfig()
        cfg = dfolsr.SolverConfig(**{**base.to_dict(), "max_evals": self.max_evals})
        fun = self._residual(X, y.astype(float))
        if self.solver == "dfolsr":
            res = dfolsr.solve(fun, h, cfg, x0=theta0)
        else:
            res = smoothing.solve(fun, h, smoothing.SmoothingConfig(inner=cfg), x0=theta0)
        self.coef_ = res.x
        self.objective_ = res.phi
        self.n_evals_ = res.n_evals
        self.termination_ = res.termination
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return np.asarray(self.model(X, self.coef_), dtype=float).ravel()
