"""Mixture parameter containers, likelihood, penalty and posterior weights.

Each of the C regression components has a coefficient vector scaled by its
inverse noise level: phi = beta / sigma with entry 0 the scaled intercept,
and rho = 1 / sigma.  That reparameterization keeps the per-component
penalized M-step convex.  All density work runs in the log domain with
max-subtraction so extreme scales cannot underflow to NaN.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidParams, InvalidPenalty, InvalidShape

_LOG_2PI = float(np.log(2.0 * np.pi))


def _logsumexp_rows(M: np.ndarray) -> np.ndarray:
    """Row-wise log-sum-exp with max subtraction (hot path; keep lean)."""
    m = M.max(axis=1)
    return m + np.log(np.exp(M - m[:, None]).sum(axis=1))


@dataclass
class MixtureParams:
    """Reparameterized mixture state.

    phi : (C, N+1) scaled coefficient vectors, entry 0 = intercept / sigma
    rho : (C,) inverse noise standard deviations, all positive
    pi  : (C,) mixing proportions, positive, summing to 1
    """

    phi: np.ndarray
    rho: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        self.phi = np.atleast_2d(np.asarray(self.phi, dtype=float))
        self.rho = np.atleast_1d(np.asarray(self.rho, dtype=float))
        self.pi = np.atleast_1d(np.asarray(self.pi, dtype=float))
        C = self.phi.shape[0]
        if self.rho.shape != (C,) or self.pi.shape != (C,):
            raise InvalidShape(
                f"phi has {C} components but rho/pi have shapes "
                f"{self.rho.shape}/{self.pi.shape}"
            )

    @property
    def n_components(self) -> int:
        return self.phi.shape[0]

    def validate(self) -> "MixtureParams":
        if np.any(self.rho <= 0):
            raise InvalidParams("rho must be strictly positive")
        if np.any(self.pi <= 0):
            raise InvalidParams("pi must be strictly positive")
        if abs(self.pi.sum() - 1.0) > 1e-12:
            raise InvalidParams(f"pi sums to {self.pi.sum()!r}, expected 1")
        return self

    def copy(self) -> "MixtureParams":
        return MixtureParams(self.phi.copy(), self.rho.copy(), self.pi.copy())

    def flat(self) -> np.ndarray:
        """All free parameters as one vector (for convergence tests)."""
        return np.concatenate([self.phi.ravel(), self.rho, self.pi])


def to_natural(params: MixtureParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Map (phi, rho, pi) back to (beta, sigma, pi).

    beta rows include the intercept in entry 0; sigma = 1 / rho.
    """
    if np.any(params.rho <= 0):
        raise InvalidParams("rho must be strictly positive")
    sigma = 1.0 / params.rho
    beta = params.phi * sigma[:, None]
    return beta, sigma, params.pi.copy()


def from_natural(beta: np.ndarray, sigma: np.ndarray, pi: np.ndarray) -> MixtureParams:
    """Inverse of :func:`to_natural`."""
    beta = np.atleast_2d(np.asarray(beta, dtype=float))
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    if np.any(sigma <= 0):
        raise InvalidParams("sigma must be strictly positive")
    return MixtureParams(beta / sigma[:, None], 1.0 / sigma, np.array(pi, dtype=float))


def uniform_weights(C: int, N: int) -> np.ndarray:
    """Unit penalty weight for every non-intercept coefficient."""
    return np.ones((C, N))


def _check_dims(params: MixtureParams, Y: np.ndarray, Z: np.ndarray):
    if Z.ndim != 2 or Y.ndim != 1 or Z.shape[0] != Y.shape[0]:
        raise InvalidShape(f"Y has shape {Y.shape} but Z has shape {Z.shape}")
    if Z.shape[1] != params.phi.shape[1]:
        raise InvalidShape(
            f"Z has {Z.shape[1]} columns but phi has {params.phi.shape[1]}"
        )


def component_log_densities(params: MixtureParams, Y, Z) -> np.ndarray:
    """n x C matrix of log[ pi_r * rho_r / sqrt(2 pi) * exp(-(rho_r Y - Z phi_r)^2 / 2) ]."""
    Y = np.asarray(Y, dtype=float)
    Z = np.asarray(Z, dtype=float)
    _check_dims(params, Y, Z)
    resid = np.outer(Y, params.rho) - Z @ params.phi.T  # n x C
    return (
        np.log(params.pi)[None, :]
        + np.log(params.rho)[None, :]
        - 0.5 * _LOG_2PI
        - 0.5 * resid**2
    )


def log_likelihood(params: MixtureParams, Y, Z) -> float:
    """Mixture log-likelihood, stabilized by log-sum-exp over components."""
    return float(_logsumexp_rows(component_log_densities(params, Y, Z)).sum())


def penalty_value(params: MixtureParams, weights: np.ndarray, gamma: float = 1.0) -> float:
    """sum_r pi_r^gamma * sum_q w_{r,q} |phi_{r,q}|, intercept excluded."""
    per_comp = np.sum(weights * np.abs(params.phi[:, 1:]), axis=1)
    return float(np.sum(params.pi**gamma * per_comp))


def penalized_objective(
    params: MixtureParams,
    Y,
    Z,
    lam: float,
    weights: np.ndarray,
    gamma: float = 1.0,
) -> float:
    """-loglik/n plus the weighted L1 penalty scaled by mixing proportions."""
    if lam < 0:
        raise InvalidPenalty(f"penalty strength must be nonnegative, got {lam}")
    n = len(np.asarray(Y))
    return -log_likelihood(params, Y, Z) / n + lam * penalty_value(params, weights, gamma)


def responsibilities(params: MixtureParams, Y, Z) -> np.ndarray:
    """Posterior component membership probabilities, one row per observation.

    Rows sum to 1; computed by max-subtraction so no row can underflow to
    all zeros even at extreme scales.
    """
    log_dens = component_log_densities(params, Y, Z)
    shifted = log_dens - log_dens.max(axis=1, keepdims=True)
    raw = np.exp(shifted)
    raw = np.clip(raw, 1e-300, 1.0)
    return raw / raw.sum(axis=1, keepdims=True)


def predictive_loss(params: MixtureParams, Y_new, Z_new) -> float:
    """-2 log-likelihood on held-out data; the tuning-selection criterion."""
    return -2.0 * log_likelihood(params, Y_new, Z_new)
