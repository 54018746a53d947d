"""Orthonormal periodic discrete wavelet transform and design-matrix helpers.

The transform maps a dyadic-length sample vector to ``2**j0`` coarse scaling
coefficients followed by wavelet coefficients ordered coarse-to-fine, with
location index running left to right inside each level.  A regression design
matrix is the transform of each curve prefixed by an intercept column of ones.

All operations are pure functions; nothing here holds mutable state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidDepth, InvalidLength, InvalidParams, InvalidShape

# Haar low-pass filter.
_HAAR = np.array([0.7071067811865476, 0.7071067811865476])

# Least-asymmetric (symmlet) low-pass filter with 8 vanishing moments,
# length 16.  Published values carry ~13 digits; these were refined in
# 50-digit arithmetic so the orthonormality and moment identities hold at
# double precision exactly.
_SYM8 = np.array([
    -0.003382415951005201,
    -0.0005421323318007707,
    0.03169508781152595,
    0.007607487324979596,
    -0.1432942383512711,
    -0.06127335906781974,
    0.4813596512590413,
    0.7771857516996297,
    0.36444189483619116,
    -0.05194583810787649,
    -0.027219029917105907,
    0.04913717967372948,
    0.003808752013895732,
    -0.014952258337062048,
    -0.0003029205147245979,
    0.0018899503327680501,
])

_FILTERS = {"haar": _HAAR, "sym8": _SYM8}
_MOMENTS = {"haar": 1, "sym8": 8}


def _quadrature_mirror(h: np.ndarray) -> np.ndarray:
    """High-pass filter g[k] = (-1)^k h[L-1-k]."""
    L = len(h)
    return np.array([(-1.0) ** k * h[L - 1 - k] for k in range(L)])


@dataclass(frozen=True)
class WaveletSpec:
    """Wavelet family, decomposition floor and boundary rule.

    Parameters
    ----------
    family : {"haar", "sym8"}
        "sym8" is the least-asymmetric family with 8 vanishing moments.
    j0 : int
        Coarsest decomposition level; ``2**j0`` scaling functions remain.
        Validated against the signal length at transform time.
    vanishing_moments : int, optional
        Must match the family (1 for haar, 8 for sym8); inferred if omitted.
    boundary : {"periodic"}
        Only periodic wrapping is supported.
    """

    family: str = "sym8"
    j0: int = 0
    vanishing_moments: int | None = None
    boundary: str = "periodic"

    def __post_init__(self):
        if self.family not in _FILTERS:
            raise InvalidParams(f"unknown wavelet family {self.family!r}")
        if self.boundary != "periodic":
            raise InvalidParams(f"unsupported boundary rule {self.boundary!r}")
        if self.j0 < 0:
            raise InvalidDepth(f"j0 must be nonnegative, got {self.j0}")
        expected = _MOMENTS[self.family]
        if self.vanishing_moments is None:
            object.__setattr__(self, "vanishing_moments", expected)
        elif self.vanishing_moments != expected:
            raise InvalidParams(
                f"{self.family} has {expected} vanishing moments, "
                f"not {self.vanishing_moments}"
            )

    @property
    def low_pass(self) -> np.ndarray:
        return _FILTERS[self.family].copy()

    @property
    def high_pass(self) -> np.ndarray:
        return _quadrature_mirror(_FILTERS[self.family])

    def validate_length(self, N: int) -> int:
        """Check N = 2**p with p >= 1 and j0 <= p - 1; return p."""
        if N < 2 or (N & (N - 1)) != 0:
            raise InvalidLength(f"signal length {N} is not a power of two >= 2")
        p = int(N).bit_length() - 1
        if self.j0 > p - 1:
            raise InvalidDepth(
                f"j0={self.j0} needs length >= {2 ** (self.j0 + 1)}, got {N}"
            )
        return p


def coeff_blocks(N: int, j0: int) -> list[tuple[str, int, int]]:
    """Half-open [start, stop) slices of the coefficient layout.

    Returns the scaling block followed by one wavelet block per level
    j = j0, ..., log2(N) - 1.
    """
    blocks = [("s", 0, 2**j0)]
    pos = 2**j0
    J = int(N).bit_length() - 2
    for j in range(j0, J + 1):
        blocks.append((f"d{j}", pos, pos + 2**j))
        pos += 2**j
    return blocks


def _analysis_indices(n: int, L: int) -> np.ndarray:
    """Periodic gather indices: row k covers x[(2k + m) mod n], m < L."""
    return (2 * np.arange(n // 2)[:, None] + np.arange(L)[None, :]) % n


def _pyramid_forward(X: np.ndarray, h: np.ndarray, g: np.ndarray, j0: int) -> np.ndarray:
    """One full decomposition of each row of X down to 2**j0 scaling coeffs."""
    out = np.empty_like(X)
    approx = X
    stop = X.shape[1]
    while approx.shape[1] > 2**j0:
        idx = _analysis_indices(approx.shape[1], len(h))
        windows = approx[:, idx]
        detail = windows @ g
        approx = windows @ h
        out[:, stop - detail.shape[1]:stop] = detail
        stop -= detail.shape[1]
    out[:, :stop] = approx
    return out


def _pyramid_inverse(C: np.ndarray, h: np.ndarray, g: np.ndarray, j0: int) -> np.ndarray:
    """Invert _pyramid_forward for each row of C."""
    n_rows, N = C.shape
    approx = C[:, : 2**j0]
    pos = 2**j0
    j = j0
    while pos < N:
        detail = C[:, pos : pos + 2**j]
        half = approx.shape[1]
        idx = _analysis_indices(2 * half, len(h)).ravel()
        contrib = approx[:, :, None] * h + detail[:, :, None] * g
        nxt = np.zeros((n_rows, 2 * half))
        # periodic wrap can hit an output sample several times; accumulate
        np.add.at(nxt, (slice(None), idx), contrib.reshape(n_rows, -1))
        approx = nxt
        pos += 2**j
        j += 1
    return approx


def dwt(signal: np.ndarray, spec: WaveletSpec) -> np.ndarray:
    """Forward orthonormal periodic transform of a dyadic-length signal.

    Output layout: ``2**j0`` scaling coefficients, then wavelet coefficients
    by level j = j0..log2(N)-1, location-ordered inside each level.
    Preserves the Euclidean norm.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise InvalidShape(f"expected a 1-d signal, got shape {x.shape}")
    spec.validate_length(x.shape[0])
    return _pyramid_forward(x[None, :], spec.low_pass, spec.high_pass, spec.j0)[0]


def idwt(coeffs: np.ndarray, spec: WaveletSpec) -> np.ndarray:
    """Inverse of :func:`dwt`; exact up to floating round-off."""
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != 1:
        raise InvalidShape(f"expected a 1-d coefficient vector, got shape {c.shape}")
    try:
        spec.validate_length(c.shape[0])
    except InvalidLength as err:
        raise InvalidDepth(str(err)) from err
    return _pyramid_inverse(c[None, :], spec.low_pass, spec.high_pass, spec.j0)[0]


def build_design(curves: np.ndarray, spec: WaveletSpec) -> np.ndarray:
    """Stack [1, dwt(curve)] rows into the n x (N+1) regression design."""
    try:
        X = np.asarray(curves, dtype=float)
    except ValueError as err:
        raise InvalidShape(f"curves are ragged: {err}") from err
    if X.ndim != 2:
        raise InvalidShape(
            f"expected an n x N array of curves, got shape {np.shape(curves)}"
        )
    spec.validate_length(X.shape[1])
    coeffs = _pyramid_forward(X, spec.low_pass, spec.high_pass, spec.j0)
    return np.hstack([np.ones((X.shape[0], 1)), coeffs])


def reconstruct_omegas(fit, spec: WaveletSpec) -> np.ndarray:
    """Coefficient functions on the sampling grid, one row per component.

    Undoes the scale reparameterization (beta = phi / rho), drops the
    intercept entry and inverse-transforms what remains.  Values are on the
    discrete-model scale; multiply by N for the integral interpretation.
    """
    rho = np.asarray(fit.rho, dtype=float)
    if np.any(rho <= 0):
        raise InvalidParams("every component scale rho must be positive")
    betas = np.asarray(fit.phi, dtype=float)[:, 1:] / rho[:, None]
    spec.validate_length(betas.shape[1])
    return _pyramid_inverse(betas, spec.low_pass, spec.high_pass, spec.j0)
