import numpy as np
import pytest

from oracles import (
    grid_minimize_coordinate,
    grid_minimize_pi,
    ols_fit,
    rho_stationarity_residual,
)
from wfmr.exceptions import DegenerateComponent, NumericalFailure, TooFewObservations
from wfmr.fit import (
    FitConfig,
    adaptive_fit,
    adaptive_weights,
    coordinate_update,
    em_fit,
    initialize,
    soft_threshold_update,
    update_intercept,
    update_pi,
    update_rho,
)
from wfmr.model import penalized_objective, uniform_weights
from wfmr.simulate import SimSetting, generate_dataset
from wfmr.tune import lambda_grid
from wfmr.wavelet import WaveletSpec, build_design


def smooth_problem(seed, n=60, N=64, r2=0.9, j0=0):
    data = generate_dataset(SimSetting(family="smooth", N=N, n=n, r2=r2, seed=seed))
    Z = build_design(data.curves, WaveletSpec("sym8", j0=j0))
    return data.responses, Z


class TestInitialize:
    def test_single_component(self):
        Y, Z = smooth_problem(0, n=20, N=16)
        params, resp = initialize(Y, Z, FitConfig(C=1, seed=1))
        assert np.all(resp == 1.0)

    def test_two_components_rows(self):
        Y, Z = smooth_problem(1, n=30, N=16)
        _, resp = initialize(Y, Z, FitConfig(C=2, seed=2))
        assert set(np.round(resp.ravel(), 12)) == {0.1, 0.9}
        np.testing.assert_allclose(resp.sum(axis=1), 1.0)

    def test_three_components_normalization(self):
        Y, Z = smooth_problem(2, n=30, N=16)
        _, resp = initialize(Y, Z, FitConfig(C=3, seed=3))
        expected = np.array([0.9, 0.1, 0.1]) / 1.1
        for row in resp:
            np.testing.assert_allclose(np.sort(row), np.sort(expected), atol=1e-12)

    def test_too_few_observations(self):
        Y, Z = smooth_problem(3, n=2, N=16)
        with pytest.raises(TooFewObservations):
            initialize(Y, Z, FitConfig(C=3, seed=0))


class TestUpdatePi:
    def test_unpenalized_is_mean_responsibility(self):
        rng = np.random.default_rng(4)
        resp = rng.dirichlet(np.ones(3), size=25)
        phi = rng.standard_normal((3, 6))
        pi = update_pi(resp, phi, 0.0, uniform_weights(3, 5))
        np.testing.assert_allclose(pi, resp.mean(axis=0), atol=1e-12)

    def test_closed_form_quadratic_example(self):
        # a = (1/2, 1/2), lam*pen = (0, 1): nu = sqrt(1/2)
        resp = np.tile([0.5, 0.5], (8, 1))
        phi = np.array([[0.0, 0.0], [0.0, 1.0]])
        pi = update_pi(resp, phi, 1.0, uniform_weights(2, 1))
        root = np.sqrt(0.5)
        np.testing.assert_allclose(pi, [0.5 / root, 0.5 / (root + 1.0)], atol=1e-9)
        assert abs(pi.sum() - 1.0) < 1e-12

    def test_symmetry(self):
        resp = np.tile([1 / 3, 1 / 3, 1 / 3], (9, 1))
        phi = np.hstack([np.zeros((3, 1)), np.full((3, 4), 0.7)])
        pi = update_pi(resp, phi, 0.8, uniform_weights(3, 4))
        np.testing.assert_allclose(pi, 1 / 3, atol=1e-12)

    @pytest.mark.parametrize("C", [2, 3])
    def test_grid_search_oracle(self, C):
        rng = np.random.default_rng(100 + C)
        for _ in range(8):
            a = rng.dirichlet(np.full(C, 2.0))
            lam_pen = rng.uniform(0.0, 1.5, C)
            resp = np.tile(a, (10, 1))
            phi = np.hstack([np.zeros((C, 1)), lam_pen[:, None]])
            pi = update_pi(resp, phi, 1.0, uniform_weights(C, 1))
            ref = grid_minimize_pi(a, lam_pen, gamma=1.0)
            np.testing.assert_allclose(pi, ref, atol=1e-5)

    def test_degenerate_component_floored(self):
        resp = np.zeros((10, 2))
        resp[:, 0] = 1.0
        phi = np.zeros((2, 3))
        pi = update_pi(resp, phi, 0.5, uniform_weights(2, 2))
        assert pi[1] >= 1e-9
        assert abs(pi.sum() - 1.0) < 1e-12


class TestUpdateRho:
    def test_unit_variance_case(self):
        rng = np.random.default_rng(5)
        n = 16
        Z = np.hstack([np.ones((n, 1)), rng.standard_normal((n, 3))])
        Y = rng.standard_normal(n)
        Y *= np.sqrt(n) / np.linalg.norm(Y)  # ||Y||^2 = n
        rho = update_rho(np.ones(n), Y, Z, np.zeros(4))
        assert abs(rho - 1.0) < 1e-12

    def test_all_ones_example(self):
        Z = np.ones((4, 2))
        Y = np.ones(4)
        assert abs(update_rho(np.ones(4), Y, Z, np.zeros(2)) - 1.0) < 1e-12

    def test_stationarity_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            n = 30
            Z = np.hstack([np.ones((n, 1)), rng.standard_normal((n, 5))])
            Y = rng.standard_normal(n) + 0.5
            delta = rng.uniform(0.05, 1.0, n)
            phi_r = rng.standard_normal(6) * 0.3
            rho = update_rho(delta, Y, Z, phi_r)
            assert rho > 0
            assert abs(rho_stationarity_residual(rho, delta, Y, Z, phi_r)) < 1e-8

    def test_zero_weighted_response_raises(self):
        with pytest.raises(DegenerateComponent):
            update_rho(np.ones(3), np.zeros(3), np.ones((3, 2)), np.zeros(2))


class TestUpdateIntercept:
    def test_mean_response(self):
        rng = np.random.default_rng(7)
        n = 12
        Z = np.hstack([np.ones((n, 1)), rng.standard_normal((n, 3))])
        Y = rng.standard_normal(n)
        got = update_intercept(np.ones(n), Y, Z, 1.0, np.zeros(4))
        assert abs(got - Y.mean()) < 1e-12

    def test_zero_case_and_rho_linearity(self):
        rng = np.random.default_rng(8)
        n = 9
        Z = np.hstack([np.ones((n, 1)), rng.standard_normal((n, 2))])
        assert update_intercept(np.ones(n), np.zeros(n), Z, 1.3, np.zeros(3)) == 0.0
        Y = rng.standard_normal(n)
        one = update_intercept(np.ones(n), Y, Z, 1.0, np.zeros(3))
        two = update_intercept(np.ones(n), Y, Z, 2.0, np.zeros(3))
        assert abs(two - 2 * one) < 1e-12

    def test_no_mass_raises(self):
        with pytest.raises(DegenerateComponent):
            update_intercept(np.zeros(4), np.ones(4), np.ones((4, 2)), 1.0, np.zeros(2))


class TestCoordinateUpdate:
    def test_threshold_rule_arithmetic(self):
        assert soft_threshold_update(2.0, 3.0, 2.0) == 0.0
        assert soft_threshold_update(5.0, 3.0, 2.0) == -1.0
        assert soft_threshold_update(-5.0, 3.0, 2.0) == 1.0
        # degenerate column is forced to zero
        assert soft_threshold_update(5.0, 3.0, 0.0) == 0.0

    def test_grid_search_oracle(self):
        rng = np.random.default_rng(9)
        n, P = 25, 7
        for _ in range(60):
            Z = np.hstack([np.ones((n, 1)), rng.standard_normal((n, P - 1))])
            Y = rng.standard_normal(n)
            delta = rng.uniform(0.05, 1.0, n)
            phi = rng.standard_normal(P) * rng.choice([0.0, 1.0], P)
            rho = rng.uniform(0.5, 2.0)
            q = int(rng.integers(1, P))
            pen_scale = rng.uniform(0.0, 0.5)
            threshold = n * pen_scale
            got = coordinate_update(q, delta, Y, Z, rho, phi, threshold)
            ref = grid_minimize_coordinate(delta, Y, Z, rho, phi, q, pen_scale, span=8.0)
            assert abs(got - ref) < 1e-6


class TestEmFit:
    def test_all_zero_at_lambda_max(self):
        for seed in range(3):
            Y, Z = smooth_problem(seed, n=50, N=32)
            config = FitConfig(C=2, seed=seed)
            lams = lambda_grid(Y, Z, config, 10)
            for lam in (lams[0], 1.1 * lams[0]):
                fit = em_fit(Y, Z, FitConfig(C=2, lam=lam, seed=seed))
                assert np.all(fit.params.phi[:, 1:] == 0.0)
                assert fit.q0 == 2 * 32

    def test_single_component_matches_least_squares(self):
        rng = np.random.default_rng(10)
        n, N = 100, 64
        Y, Z = smooth_problem(11, n=n, N=N)
        fit = em_fit(Y, Z, FitConfig(C=1, lam=0.0, seed=0, tau=1e-10, max_em_iters=5000))
        beta_hat = fit.params.phi[0] / fit.params.rho[0]
        beta_ref, sig2_ref = ols_fit(Y, Z)
        assert np.max(np.abs(beta_hat - beta_ref)) < 1e-4
        assert abs(1.0 / fit.params.rho[0] ** 2 - sig2_ref) < 1e-4

    def test_objective_trace_non_increasing(self):
        for seed, family, r2 in [(0, "smooth", 0.9), (1, "bumpy", 0.5), (2, "smooth", 0.7)]:
            data = generate_dataset(SimSetting(family=family, N=64, n=60, r2=r2, seed=seed))
            Z = build_design(data.curves, WaveletSpec("sym8", j0=0))
            lams = lambda_grid(data.responses, Z, FitConfig(C=2, seed=seed), 5)
            fit = em_fit(data.responses, Z, FitConfig(C=2, lam=lams[2], seed=seed))
            diffs = np.diff(fit.objective_trace)
            assert np.all(diffs <= 1e-8)

    def test_bitwise_determinism(self):
        Y, Z = smooth_problem(12, n=40, N=32)
        cfg = FitConfig(C=2, lam=0.02, seed=7)
        a = em_fit(Y, Z, cfg)
        b = em_fit(Y, Z, cfg)
        assert np.array_equal(a.params.phi, b.params.phi)
        assert np.array_equal(a.params.rho, b.params.rho)
        assert np.array_equal(a.params.pi, b.params.pi)
        assert np.array_equal(a.objective_trace, b.objective_trace)
        assert a.n_iters == b.n_iters

    def test_permutation_equivariance(self):
        Y, Z = smooth_problem(13, n=40, N=32)
        n = len(Y)
        rng = np.random.default_rng(3)
        classes = rng.integers(0, 2, n)
        cfg = FitConfig(C=2, lam=0.05, seed=0)
        w = uniform_weights(2, 32)
        p1, _ = initialize(Y, Z, cfg, classes=classes)
        p2, _ = initialize(Y, Z, cfg, classes=1 - classes)
        f1 = em_fit(Y, Z, cfg, init=p1)
        f2 = em_fit(Y, Z, cfg, init=p2)
        o1 = penalized_objective(f1.params, Y, Z, cfg.lam, w)
        o2 = penalized_objective(f2.params, Y, Z, cfg.lam, w)
        assert abs(o1 - o2) < 1e-8
        np.testing.assert_allclose(f1.params.phi, f2.params.phi[::-1], atol=1e-6)

    def test_exact_zeros_are_bitwise(self):
        Y, Z = smooth_problem(14, n=50, N=32)
        cfg = FitConfig(C=2, seed=2)
        lam = lambda_grid(Y, Z, cfg, 10)[3]
        fit = em_fit(Y, Z, FitConfig(C=2, lam=lam, seed=2))
        coeffs = fit.params.phi[:, 1:]
        n_zero = int(np.sum(coeffs == 0.0))
        assert n_zero == fit.q0
        assert n_zero > 0

    def test_fixed_point_stationarity(self):
        Y, Z = smooth_problem(15, n=50, N=32)
        cfg = FitConfig(C=2, seed=4, tau=1e-12, max_em_iters=4000)
        lam = lambda_grid(Y, Z, cfg, 10)[4]
        cfg = FitConfig(C=2, lam=lam, seed=4, tau=1e-12, max_em_iters=4000)
        fit = em_fit(Y, Z, cfg)
        assert fit.converged
        resp = fit.responsibilities
        n, P = Z.shape
        for r in range(2):
            delta = resp[:, r]
            phi_r = fit.params.phi[r].copy()
            rho = fit.params.rho[r]
            # scale stationarity
            assert abs(rho_stationarity_residual(rho, delta, Y, Z, phi_r)) < 1e-6
            # every coordinate reproduces itself under the update rule
            threshold = n * cfg.lam * fit.params.pi[r]
            for q in range(1, P):
                new = coordinate_update(q, delta, Y, Z, rho, phi_r.copy(), threshold)
                assert abs(new - phi_r[q]) < 1e-6

    def test_nan_objective_raises(self):
        Y, Z = smooth_problem(16, n=30, N=16)
        Y = Y.copy()
        Y[0] = np.nan
        with pytest.raises(NumericalFailure) as err:
            em_fit(Y, Z, FitConfig(C=2, lam=0.1, seed=0))
        assert isinstance(err.value.trace, list)


class TestAdaptiveFit:
    def test_weight_formula(self):
        phi = np.array([[0.5, 0.0, 1.0, -2.0]])
        w = adaptive_weights(phi, eps=0.001)
        np.testing.assert_allclose(w[0], [1000.0, 1.0 / 1.001, 1.0 / 2.001])
        assert w[0][1] == pytest.approx(0.999000999000999)

    def test_stage2_active_set_within_stage1(self):
        # recorded over 20 seeded smooth-setting runs at equal penalty
        hits = 0
        for seed in range(20):
            Y, Z = smooth_problem(200 + seed, n=60, N=32)
            cfg0 = FitConfig(C=2, seed=seed)
            lam = lambda_grid(Y, Z, cfg0, 10)[4]
            cfg = FitConfig(C=2, lam=lam, seed=seed, adaptive=True)
            stage1 = em_fit(Y, Z, FitConfig(C=2, lam=lam, seed=seed))
            stage2 = adaptive_fit(Y, Z, cfg)
            s1 = stage1.params.phi[:, 1:] != 0
            s2 = stage2.params.phi[:, 1:] != 0
            if np.all(s1 | ~s2):
                hits += 1
        assert hits == 20

    def test_error_propagation(self):
        Y, Z = smooth_problem(17, n=30, N=16)
        Y = Y.copy()
        Y[0] = np.inf
        with pytest.raises(NumericalFailure):
            adaptive_fit(Y, Z, FitConfig(C=2, lam=0.1, seed=0, adaptive=True))
