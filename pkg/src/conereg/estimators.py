"""scikit-learn style wrappers around the exponent fit and the DtN map."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .morrey import LOG_CORRECTED, fit_holder_exponent


class HolderExponentEstimator(RegressorMixin, BaseEstimator):
    """Fit ball energies against radius.

    ``X`` holds radii (one column), ``y`` normalized energies. After
    ``fit``, ``alpha_``, ``gamma_`` and ``regime_`` describe the decay and
    ``predict`` returns the fitted energies.
    """

    def __init__(self, tol=0.05, tie_ratio=1.2):
        self.tol = tol
        self.tie_ratio = tie_ratio

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_min_samples=4)
        if X.shape[1] != 1:
            raise ValueError("X must have a single column of radii")
        r = X[:, 0]
        fit = fit_holder_exponent(r, y, tol=self.tol, tie_ratio=self.tie_ratio)
        self.fit_ = fit
        self.alpha_ = float(fit.alpha_hat)
        self.gamma_ = None if fit.gamma_hat is None else float(fit.gamma_hat)
        self.regime_ = fit.regime
        lx = np.log(r)
        if fit.regime == LOG_CORRECTED:
            feature = np.log(-lx)
            slope = 2 * self.gamma_
        else:
            feature = lx
            slope = 2 * self.alpha_ - 2
        self.log_lambda_ = float(np.mean(np.log(y) - slope * feature))
        self._slope = slope
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "alpha_")
        X = check_array(X)
        lx = np.log(X[:, 0])
        feature = np.log(-lx) if self.regime_ == LOG_CORRECTED else lx
        return np.exp(self.log_lambda_ + self._slope * feature)

    def score(self, X, y, sample_weight=None):
        """R^2 of the fit in log-energy space."""
        from sklearn.metrics import r2_score

        return r2_score(np.log(y), np.log(self.predict(X)), sample_weight=sample_weight)


class DirichletToNeumann(TransformerMixin, BaseEstimator):
    """Boundary traces (rows of link-mode coefficients) to normal derivatives.

    ``fit`` assembles the cone and the DtN matrix; ``X`` is ignored there.
    """

    def __init__(self, link=None, rho=1.0, radial_nodes=128, modes=5, Lambda=0.0,
                 gamma=1.0, potential=None):
        self.link = link
        self.rho = rho
        self.radial_nodes = radial_nodes
        self.modes = modes
        self.Lambda = Lambda
        self.gamma = gamma
        self.potential = potential

    def fit(self, X=None, y=None):
        from .cone import ConeGrid, MetricPerturbation, dtn_perturbed

        if self.link is None:
            raise ValueError("link is required")
        self.grid_ = ConeGrid(self.link, rho=self.rho, radial_nodes=self.radial_nodes,
                              modes=self.modes,
                              perturbation=MetricPerturbation(self.Lambda, self.gamma),
                              potential=self.potential)
        self.matrix_ = dtn_perturbed(self.grid_)
        self.eigenvalues_ = np.linalg.eigvalsh(0.5 * (self.matrix_ + self.matrix_.T))
        self.n_features_in_ = self.grid_.n_modes
        return self

    def transform(self, X):
        check_is_fitted(self, "matrix_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} trace coefficients per row")
        return X @ self.matrix_.T
