import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wfmr.exceptions import InvalidDepth, InvalidLength, InvalidParams, InvalidShape
from wfmr.model import MixtureParams
from wfmr.wavelet import (
    WaveletSpec,
    build_design,
    coeff_blocks,
    dwt,
    idwt,
    reconstruct_omegas,
)

FAMILIES = ("haar", "sym8")


@pytest.mark.parametrize("family", FAMILIES)
def test_filter_identities(family):
    spec = WaveletSpec(family)
    h = spec.low_pass
    assert abs(h.sum() - np.sqrt(2)) < 1e-12
    assert abs((h**2).sum() - 1.0) < 1e-12
    for s in range(1, len(h) // 2):
        assert abs(np.dot(h[: -2 * s], h[2 * s :])) < 1e-12


@pytest.mark.parametrize("family", FAMILIES)
def test_high_pass_is_quadrature_mirror(family):
    spec = WaveletSpec(family)
    h, g = spec.low_pass, spec.high_pass
    L = len(h)
    for k in range(L):
        assert g[k] == (-1.0) ** k * h[L - 1 - k]


def test_spec_validation():
    with pytest.raises(InvalidParams):
        WaveletSpec("db4")
    with pytest.raises(InvalidParams):
        WaveletSpec("sym8", boundary="symmetric")
    with pytest.raises(InvalidParams):
        WaveletSpec("sym8", vanishing_moments=4)
    with pytest.raises(InvalidDepth):
        WaveletSpec("haar", j0=-1)
    assert WaveletSpec("haar").vanishing_moments == 1
    assert WaveletSpec("sym8").vanishing_moments == 8


def test_dwt_constant_signal():
    spec = WaveletSpec("haar", j0=0)
    out = dwt(np.ones(8), spec)
    assert abs(out[0] - np.sqrt(8)) < 1e-12
    assert np.max(np.abs(out[1:])) < 1e-12


def test_dwt_errors():
    spec = WaveletSpec("haar", j0=0)
    with pytest.raises(InvalidLength):
        dwt(np.ones(6), spec)
    with pytest.raises(InvalidDepth):
        dwt(np.ones(8), WaveletSpec("haar", j0=3))
    with pytest.raises(InvalidShape):
        dwt(np.ones((2, 8)), spec)


def test_idwt_trivial_examples():
    spec = WaveletSpec("haar", j0=0)
    coeffs = np.zeros(8)
    coeffs[0] = np.sqrt(8)
    assert np.max(np.abs(idwt(coeffs, spec) - 1.0)) < 1e-12
    assert np.max(np.abs(idwt(np.zeros(8), spec))) == 0.0
    with pytest.raises(InvalidDepth):
        idwt(np.zeros(6), spec)


@pytest.mark.parametrize("family", FAMILIES)
def test_round_trip_oracle(family):
    # 100 seeded vectors over the stated lengths
    rng = np.random.default_rng(1234)
    for N in (64, 128, 256, 512):
        p = int(np.log2(N))
        for rep in range(25):
            j0 = rep % p
            spec = WaveletSpec(family, j0=j0)
            x = rng.standard_normal(N)
            c = dwt(x, spec)
            assert abs(c @ c - x @ x) < 1e-10  # Parseval
            assert np.max(np.abs(idwt(c, spec) - x)) < 1e-10


@settings(max_examples=40, deadline=None)
@given(
    st.integers(min_value=2, max_value=8),
    st.integers(min_value=0, max_value=7),
    st.sampled_from(FAMILIES),
    st.integers(min_value=0, max_value=2**32 - 1),
)
def test_transform_properties(p, j0_raw, family, seed):
    N = 2**p
    j0 = j0_raw % p
    spec = WaveletSpec(family, j0=j0)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(N)
    w = rng.standard_normal(N)
    a, b = rng.standard_normal(2)
    cx, cw = dwt(x, spec), dwt(w, spec)
    # linearity
    assert np.max(np.abs(dwt(a * x + b * w, spec) - (a * cx + b * cw))) < 1e-10
    # inner-product preservation (this is what removes the cross terms in
    # the transformed regression)
    assert abs(cx @ cw - x @ w) < 1e-8


def test_vanishing_moments_on_interior():
    # constants are annihilated even with the periodic wrap
    for family in FAMILIES:
        spec = WaveletSpec(family, j0=0)
        c = dwt(np.full(256, 3.7), spec)
        assert np.max(np.abs(c[1:])) < 1e-12
    # a ramp is annihilated wherever the filter window does not wrap
    N = 256
    spec = WaveletSpec("sym8", j0=0)
    c = dwt(np.arange(N, dtype=float), spec)
    blocks = coeff_blocks(N, 0)
    label, start, stop = blocks[-1]  # finest level, window length 16
    fine = c[start:stop]
    interior = fine[: (N - 16) // 2]
    assert np.max(np.abs(interior)) < 1e-6


def test_coeff_blocks_layout():
    assert coeff_blocks(8, 0) == [("s", 0, 1), ("d0", 1, 2), ("d1", 2, 4), ("d2", 4, 8)]
    assert coeff_blocks(8, 2) == [("s", 0, 4), ("d2", 4, 8)]


def test_build_design_small_case_layout():
    # N = 4, j0 = 1, Haar: one pyramid stage, enumerated by hand
    x = np.array([1.0, 2.0, 4.0, 8.0])
    s = np.array([x[0] + x[1], x[2] + x[3]]) / np.sqrt(2)
    d = np.array([x[0] - x[1], x[2] - x[3]]) / np.sqrt(2)
    row = build_design(x[None, :], WaveletSpec("haar", j0=1))[0]
    assert row.shape == (5,)
    assert row[0] == 1.0
    np.testing.assert_allclose(row[1:3], s, atol=1e-12)
    np.testing.assert_allclose(row[3:5], d, atol=1e-12)


def test_build_design_constant_and_duplicates():
    spec = WaveletSpec("sym8", j0=0)
    c = 2.5
    row = build_design(np.full((1, 64), c), spec)[0]
    assert row[0] == 1.0
    assert abs(row[1] - c * np.sqrt(64)) < 1e-10
    assert np.max(np.abs(row[2:])) < 1e-10

    rng = np.random.default_rng(5)
    x = rng.standard_normal(64)
    two = build_design(np.vstack([x, x]), spec)
    assert np.array_equal(two[0], two[1])


def test_build_design_ragged_raises():
    with pytest.raises(InvalidShape):
        build_design([[1.0, 2.0], [1.0, 2.0, 3.0]], WaveletSpec("haar"))


def test_reconstruct_omegas():
    spec = WaveletSpec("sym8", j0=2)
    N = 128
    grid = np.arange(1, N + 1) / (N + 1)
    curve = np.sin(2 * np.pi * grid)

    beta = dwt(curve, spec)
    rho = 1.7
    phi = np.concatenate([[0.3], beta * rho])[None, :]
    params = MixtureParams(phi=phi, rho=np.array([rho]), pi=np.array([1.0]))
    omega = reconstruct_omegas(params, spec)[0]
    assert np.max(np.abs(omega - curve)) < 1e-10

    # all-zero coefficients give the zero function
    zero = MixtureParams(np.zeros((1, N + 1)), np.array([2.0]), np.array([1.0]))
    assert np.max(np.abs(reconstruct_omegas(zero, spec))) == 0.0

    # doubling rho with phi fixed halves the curve pointwise
    half = MixtureParams(phi, np.array([2 * rho]), np.array([1.0]))
    np.testing.assert_allclose(reconstruct_omegas(half, spec)[0], omega / 2, atol=1e-12)

    bad = MixtureParams(phi, np.array([-1.0]), np.array([1.0]))
    with pytest.raises(InvalidParams):
        reconstruct_omegas(bad, spec)
