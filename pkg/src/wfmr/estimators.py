"""Scikit-learn flavored wrappers around the transform and the mixture fit.

`WaveletDesign` is a stateless transformer mapping sampled curves to their
orthonormal wavelet coordinates, and `WaveletMixtureRegressor` fits the
penalized mixture of regressions on curves X and scalar responses y.  Both
follow the usual conventions (get_params/set_params, fitted attributes with
trailing underscores, check_array validation), so they compose with
pipelines and model-selection utilities.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .fit import FitConfig, adaptive_fit, em_fit
from .model import responsibilities, to_natural
from .wavelet import WaveletSpec, build_design, idwt, reconstruct_omegas


def _validate_curves(X, spec: WaveletSpec):
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    spec.validate_length(X.shape[1])
    return X


class WaveletDesign(TransformerMixin, BaseEstimator):
    """Transform curves sampled at a dyadic number of points into wavelet
    coordinates, optionally prefixed by an intercept column.

    Parameters
    ----------
    wavelet : {"sym8", "haar"}, default "sym8"
    j0 : int, default 0
        Coarsest decomposition level (2**j0 scaling coefficients).
    include_intercept : bool, default False
        Prepend a constant-1 column, matching the regression design layout.
    """

    def __init__(self, wavelet="sym8", j0=0, include_intercept=False):
        self.wavelet = wavelet
        self.j0 = j0
        self.include_intercept = include_intercept

    def fit(self, X, y=None):
        spec = WaveletSpec(family=self.wavelet, j0=self.j0)
        X = _validate_curves(X, spec)
        self.spec_ = spec
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        X = _validate_curves(X, self.spec_)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} points; fitted on {self.n_features_in_}"
            )
        Z = build_design(X, self.spec_)
        return Z if self.include_intercept else Z[:, 1:]

    def inverse_transform(self, C):
        check_is_fitted(self, "spec_")
        C = check_array(C, dtype=np.float64)
        coeffs = C[:, 1:] if self.include_intercept else C
        return np.vstack([idwt(row, self.spec_) for row in coeffs])


class WaveletMixtureRegressor(RegressorMixin, BaseEstimator):
    """Finite mixture of scalar-on-curve regressions fit in the wavelet
    domain by L1-penalized EM with coordinate descent.

    Parameters
    ----------
    n_components : int, default 2
    penalty : float, default 0.0
        L1 strength applied to the scaled coefficients (lambda).
    wavelet : {"sym8", "haar"}, default "sym8"
    j0 : int, default 0
    adaptive : bool, default False
        Refit with reciprocal-magnitude weights from a first pass.
    gamma : float, default 1.0
        Exponent on the mixing proportion inside the penalty (0, 0.5 or 1).
    tol : float, default 1e-6
    max_iter : int, default 500
    active_set_period : int, default 11
    random_state : int, default 0
        Seeds the random class assignment that starts the EM.

    Attributes
    ----------
    coef_functions_ : (C, N) coefficient functions on the sampling grid,
        discrete-model scale (multiply by N for the integral scale).
    intercepts_, sigmas_, weights_ : per-component intercept, noise SD and
        mixing proportion.
    responsibilities_ : (n, C) posterior memberships of the training data.
    result_ : the underlying FitResult with the full trace.
    """

    def __init__(self, n_components=2, penalty=0.0, wavelet="sym8", j0=0,
                 adaptive=False, gamma=1.0, tol=1e-6, max_iter=500,
                 active_set_period=11, random_state=0):
        self.n_components = n_components
        self.penalty = penalty
        self.wavelet = wavelet
        self.j0 = j0
        self.adaptive = adaptive
        self.gamma = gamma
        self.tol = tol
        self.max_iter = max_iter
        self.active_set_period = active_set_period
        self.random_state = random_state

    def _config(self) -> FitConfig:
        return FitConfig(
            C=self.n_components, lam=self.penalty, tau=self.tol,
            max_em_iters=self.max_iter,
            active_set_period=self.active_set_period,
            seed=self.random_state, adaptive=self.adaptive, gamma=self.gamma,
        )

    def fit(self, X, y):
        spec = WaveletSpec(family=self.wavelet, j0=self.j0)
        X = _validate_curves(X, spec)
        y = check_array(y, ensure_2d=False, dtype=np.float64)
        if y.ndim != 1 or len(y) != X.shape[0]:
            raise ValueError(f"y has shape {y.shape}; expected ({X.shape[0]},)")
        Z = build_design(X, spec)
        config = self._config()
        runner = adaptive_fit if self.adaptive else em_fit
        result = runner(y, Z, config)

        beta, sigma, pi = to_natural(result.params)
        self.spec_ = spec
        self.n_features_in_ = X.shape[1]
        self.result_ = result
        self.coef_functions_ = reconstruct_omegas(result.params, spec)
        self.intercepts_ = beta[:, 0].copy()
        self.sigmas_ = sigma
        self.weights_ = pi
        self.responsibilities_ = result.responsibilities
        self.n_iter_ = result.n_iters
        self.converged_ = result.converged
        return self

    def _design(self, X):
        check_is_fitted(self, "result_")
        X = _validate_curves(X, self.spec_)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} points; fitted on {self.n_features_in_}"
            )
        return build_design(X, self.spec_)

    def predict_components(self, X):
        """Per-component mean responses, shape (n, C)."""
        Z = self._design(X)
        beta, _, _ = to_natural(self.result_.params)
        return Z @ beta.T

    def predict(self, X):
        """Mixture-weighted mean response."""
        return self.predict_components(X) @ self.weights_

    def predict_proba(self, X, y):
        """Posterior component memberships of (X, y) pairs."""
        Z = self._design(X)
        y = check_array(y, ensure_2d=False, dtype=np.float64)
        return responsibilities(self.result_.params, y, Z)
