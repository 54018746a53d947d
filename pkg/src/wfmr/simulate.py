"""Synthetic data: Brownian-bridge curves, two coefficient-function families,
and responses whose signal-to-noise ratio is calibrated exactly.

Curves are sampled on the interior grid t_j = j/(N+1), so the pinned zero
endpoints of the bridge stay off-grid.  Responses use the mean Riemann sum
of curve times coefficient function plus Gaussian noise whose variance is
chosen from the exact bridge covariance so the population R-squared matches
the requested target.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidTarget

BUMP_SHARPNESS = 20000.0 / 9.0


def sample_grid(N: int) -> np.ndarray:
    """Interior equally spaced points j/(N+1), j = 1..N."""
    return np.arange(1, N + 1) / (N + 1.0)


def bridge_covariance(grid: np.ndarray) -> np.ndarray:
    """cov(X(s), X(t)) = min(s,t) (1 - max(s,t)) on the given points."""
    s = np.minimum.outer(grid, grid)
    t = np.maximum.outer(grid, grid)
    return s * (1.0 - t)


def brownian_bridge(N: int, seed, size: int = 1) -> np.ndarray:
    """Draw `size` bridge paths on sample_grid(N) from the exact covariance.

    The covariance matrix is factorized once (Cholesky), so the finite-
    dimensional law is exact at any N.  Returns shape (size, N), or (N,)
    when size is 1.
    """
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    grid = sample_grid(N)
    L = np.linalg.cholesky(bridge_covariance(grid))
    draws = rng.standard_normal((size, N)) @ L.T
    return draws[0] if size == 1 else draws


def coefficient_functions(family: str, grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """The two component coefficient functions sampled on grid."""
    t = np.asarray(grid, dtype=float)
    if family == "smooth":
        return -np.sin(2.0 * np.pi * t), np.sin(np.pi * t)
    if family == "bumpy":
        a = BUMP_SHARPNESS

        def bump(center):
            return np.exp(-a * (t - center) ** 2)

        w1 = -3.257 * bump(0.15) + 4.886 * bump(0.25) - 3.257 * bump(0.5) + 2.606 * bump(0.9)
        w2 = 3.257 * bump(0.1) - 4.886 * bump(0.35) + 3.257 * bump(0.7)
        return w1, w2
    raise ValueError(f"unknown coefficient family {family!r}")


def signal_variances(omegas, grid: np.ndarray) -> np.ndarray:
    """Exact Var of the mean Riemann sum of a bridge against each omega.

    Var(N^-1 sum_j X(t_j) w(t_j)) = N^-2 w' Sigma w with Sigma the bridge
    covariance on the grid.
    """
    cov = bridge_covariance(grid)
    N = len(grid)
    return np.array([float(w @ cov @ w) / N**2 for w in omegas])


def calibrate_sigma(family: str, grid: np.ndarray, r2_target: float, mixing) -> float:
    """Common noise SD giving the requested mixture signal-to-noise ratio."""
    if not 0.0 < r2_target < 1.0:
        raise InvalidTarget(f"R^2 target must lie in (0, 1), got {r2_target}")
    mixing = np.asarray(mixing, dtype=float)
    v = signal_variances(coefficient_functions(family, grid), grid)
    vbar = float(mixing @ v)
    return float(np.sqrt(vbar * (1.0 - r2_target) / r2_target))


@dataclass
class SimSetting:
    """One cell of the simulation design."""

    family: str = "smooth"
    N: int = 128
    n: int = 100
    r2: float = 0.9
    mixing: tuple = (0.5, 0.5)
    alphas: tuple = (0.0, 0.0)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.r2 < 1.0:
            raise InvalidTarget(f"R^2 target must lie in (0, 1), got {self.r2}")
        if abs(sum(self.mixing) - 1.0) > 1e-9:
            raise ValueError(f"mixing proportions sum to {sum(self.mixing)}")
        if len(self.alphas) != len(self.mixing):
            raise ValueError("alphas and mixing must have equal length")


@dataclass
class SimDataset:
    curves: np.ndarray  # n x N
    responses: np.ndarray  # n
    labels: np.ndarray  # n, in {0..C-1}
    sigma: float
    grid: np.ndarray
    setting: SimSetting


def generate_dataset(setting: SimSetting) -> SimDataset:
    """Draw one dataset; fully determined by setting.seed."""
    rng = np.random.default_rng(setting.seed)
    grid = sample_grid(setting.N)
    omegas = np.vstack(coefficient_functions(setting.family, grid))
    sigma = calibrate_sigma(setting.family, grid, setting.r2, setting.mixing)

    labels = rng.choice(len(setting.mixing), size=setting.n, p=setting.mixing)
    curves = brownian_bridge(setting.N, rng, size=setting.n)
    signal = (curves @ omegas.T) / setting.N  # mean Riemann sum per component
    alphas = np.asarray(setting.alphas, dtype=float)
    responses = (
        alphas[labels]
        + signal[np.arange(setting.n), labels]
        + sigma * rng.standard_normal(setting.n)
    )
    return SimDataset(curves, responses, labels, sigma, grid, setting)


def replicate_seeds(master_seed: int, count: int) -> list[int]:
    """Independent child seeds for parallel replicates."""
    seq = np.random.SeedSequence(master_seed)
    return [int(s.generate_state(1)[0]) for s in seq.spawn(count)]
