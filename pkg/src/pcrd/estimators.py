"""scikit-learn style wrappers around model fitting and QP selection.

``X`` is always an ``(n, 2)`` array of (q_g, q_c); fitted targets ``y`` are
``(n, 2)`` arrays of measured (D, R).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .optimizer import SolverConfig, solve
from .rdmodel import Measurement, RdModels, eval_distortion, eval_rate, fit
from .validation import check_budgets, check_qp_grid, check_qp_pairs, check_rd_targets


def measurements_from_arrays(X, y) -> list[Measurement]:
    X = check_qp_pairs(X)
    y = check_rd_targets(y, len(X))
    return [Measurement(int(g), int(c), float(d), float(r)) for (g, c), (d, r) in zip(X, y)]


class RateDistortionModel(RegressorMixin, BaseEstimator):
    """Separable polynomial D and R models fitted from a pre-encoding sweep.

    ``predict`` returns ``(n, 2)`` model (D, R) at arbitrary real QPs.
    ``score`` is the mean R^2 over both outputs.
    """

    def __init__(self, anchor=None):
        self.anchor = anchor

    def fit(self, X, y):
        self.models_ = fit(measurements_from_arrays(X, y), self.anchor)
        self.n_features_in_ = 2
        return self

    def predict(self, X):
        check_is_fitted(self, "models_")
        X = check_qp_grid(X)
        return np.column_stack([
            eval_distortion(self.models_, X[:, 0], X[:, 1]),
            eval_rate(self.models_, X[:, 0], X[:, 1]),
        ])

    @classmethod
    def from_models(cls, models: RdModels) -> "RateDistortionModel":
        est = cls(anchor=models.anchor)
        est.models_ = models
        est.n_features_in_ = 2
        return est


class BudgetedQPSelector(BaseEstimator):
    """Fits the models, then maps target rates (Mbps) to integer QP pairs.

    Solver settings are plain constructor parameters so ``get_params`` and
    ``set_params`` work; ``results_`` keeps the full solve record of the
    last ``predict`` call.
    """

    def __init__(self, anchor=None, alpha=1.5, rho0=50.0, lambda0=0.0, gamma=0.001,
                 outer_tol=1e-6, inner_tol=1e-9, q_init=None, max_outer=100, max_inner=100_000):
        self.anchor = anchor
        self.alpha = alpha
        self.rho0 = rho0
        self.lambda0 = lambda0
        self.gamma = gamma
        self.outer_tol = outer_tol
        self.inner_tol = inner_tol
        self.q_init = q_init
        self.max_outer = max_outer
        self.max_inner = max_inner

    def solver_config(self) -> SolverConfig:
        return SolverConfig.from_overrides(self.get_params())

    def fit(self, X, y):
        self.model_ = RateDistortionModel(self.anchor).fit(X, y)
        self.models_ = self.model_.models_
        self.n_features_in_ = 2
        return self

    def predict(self, budgets):
        check_is_fitted(self, "models_")
        config = self.solver_config()
        self.results_ = [solve(self.models_, float(b), config) for b in check_budgets(budgets)]
        return np.array([(r.q_g_star, r.q_c_star) for r in self.results_], dtype=np.int64).reshape(-1, 2)
