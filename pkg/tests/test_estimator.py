import numpy as np
import pytest
from scipy.optimize import minimize

from gsample.costs import bcrb
from gsample.estimator import (
    analytic_mse,
    bias,
    build_state,
    estimate,
    estimate_bandlimited,
    measurement_matrix,
    measurement_rank,
)
from gsample.exceptions import ObservabilityError, RankError
from gsample.model import BandlimitedSpec, ProblemInstance, SamplingVector, sample_prior
from gsample.spectral import FilterSpec
from tests.conftest import make_instance


def full_identity_instance(n=5, sigma2=0.04, mu=0.0):
    return make_instance(seed=0, n=n, h_m=FilterSpec.identity(),
                         h_r=FilterSpec.identity(), mu=mu, sigma2=sigma2)


class TestBuildState:
    def test_full_sampling_no_regularization(self):
        inst = full_identity_instance(n=5, sigma2=0.04, mu=0.0)
        state = build_state(inst, SamplingVector.full(5))
        np.testing.assert_allclose(state.K, np.eye(5) / 0.04, atol=1e-10)

    def test_empty_sampling(self):
        inst = make_instance(seed=1, n=6, mu=0.8)
        state = build_state(inst, SamplingVector.empty(6))
        np.testing.assert_allclose(state.K, 0.8 * inst.h_r_mat, atol=1e-12)

    def test_rank_one_additivity_single(self):
        inst = make_instance(seed=2, n=8)
        base = SamplingVector.from_indices([1, 3, 4], 8, budget=8)
        grown = SamplingVector.from_indices([1, 3, 4, 6], 8, budget=8)
        r = np.sqrt(inst.noise_inv[6, 6]) * inst.h_m_mat[:, 6]
        K_direct = build_state(inst, grown).K
        K_update = build_state(inst, base).K + np.outer(r, r)
        np.testing.assert_allclose(K_direct, K_update, atol=1e-12)

    def test_rank_one_additivity_sweep(self):
        # 200 random (set, extra node) pairs under diagonal noise covariance.
        inst = make_instance(seed=3, n=10)
        rng = np.random.default_rng(0)
        for _ in range(200):
            size = int(rng.integers(0, 9))
            perm = rng.permutation(10)
            s = perm[:size]
            a = int(perm[size])
            base = SamplingVector.from_indices(s, 10, budget=10)
            grown = SamplingVector.from_indices(list(s) + [a], 10, budget=10)
            r = np.sqrt(inst.noise_inv[a, a]) * inst.h_m_mat[:, a]
            K_direct = build_state(inst, grown).K
            K_update = build_state(inst, base).K + np.outer(r, r)
            err = np.abs(K_direct - K_update).max()
            assert err <= 1e-10 * np.abs(K_direct).max()

    def test_singular_detection_and_gate(self):
        # Laplacian regularizer and measurement filter leave the constant
        # direction uncovered, so K is singular.
        inst = make_instance(seed=4, n=6, h_m=FilterSpec.laplacian_power(1),
                             h_r=FilterSpec.laplacian_power(1), mu=0.2)
        state = build_state(inst, SamplingVector.full(6))
        assert state.singular
        with pytest.raises(RankError):
            build_state(inst, SamplingVector.full(6), allow_singular=False)

    def test_solve_residual_contract(self):
        inst = make_instance(seed=5, n=9)
        state = build_state(inst, SamplingVector.from_indices([0, 2, 5], 9))
        rng = np.random.default_rng(1)
        b = rng.standard_normal(9)
        x = state.solve(b)
        residual = np.linalg.norm(state.K @ x - b)
        assert residual <= 1e-10 * np.linalg.norm(state.K, 2) * np.linalg.norm(x)


class TestEstimate:
    def test_full_identity_returns_y(self):
        inst = full_identity_instance(n=5, sigma2=1.0, mu=0.0)
        state = build_state(inst, SamplingVector.full(5))
        y = np.arange(5.0)
        np.testing.assert_allclose(estimate(state, y), y, atol=1e-12)

    def test_empty_returns_prior_mean(self):
        x0 = np.linspace(-1, 1, 6)
        inst = make_instance(seed=6, n=6, mu=0.4, x0=x0)
        state = build_state(inst, SamplingVector.empty(6))
        np.testing.assert_allclose(estimate(state, np.zeros(6)), x0, atol=1e-10)

    def test_matches_generic_quadratic_minimizer(self):
        # Independent oracle: minimize the penalized least-squares objective
        # numerically and compare.
        inst = make_instance(seed=7, n=6, mu=0.6, x0=np.full(6, 0.3))
        d = SamplingVector.from_indices([0, 2, 3], 6)
        rng = np.random.default_rng(2)
        y = d.values * rng.standard_normal(6)
        hM = inst.h_m_mat
        hR = inst.h_r_mat
        Rinv = inst.noise_inv
        D = np.diag(d.values)

        def objective(x):
            r = D @ (y - hM @ x)
            dev = x - inst.x0
            return float(r @ Rinv @ r + inst.mu * dev @ hR @ dev)

        def grad(x):
            return 2.0 * (hM @ D @ Rinv @ D @ (hM @ x - y) + inst.mu * hR @ (x - inst.x0))

        res = minimize(objective, np.zeros(6), jac=grad, method="L-BFGS-B",
                       options={"ftol": 1e-16, "gtol": 1e-12, "maxiter": 2000})
        state = build_state(inst, d)
        np.testing.assert_allclose(estimate(state, y), res.x, rtol=1e-6, atol=1e-8)

    def test_batched_estimation(self):
        inst = make_instance(seed=8, n=7)
        d = SamplingVector.from_indices([1, 2, 6], 7)
        state = build_state(inst, d)
        rng = np.random.default_rng(3)
        Y = rng.standard_normal((7, 4))
        batch = estimate(state, Y)
        for j in range(4):
            np.testing.assert_allclose(batch[:, j], estimate(state, Y[:, j]), atol=1e-12)


class TestBias:
    def test_zero_at_reference(self):
        x0 = np.linspace(0, 1, 8)
        inst = make_instance(seed=9, n=8, x0=x0)
        state = build_state(inst, SamplingVector.from_indices([0, 3], 8))
        np.testing.assert_allclose(bias(state, x0), np.zeros(8), atol=1e-12)

    def test_unbiased_without_regularization(self):
        inst = full_identity_instance(n=5, mu=0.0)
        state = build_state(inst, SamplingVector.full(5))
        rng = np.random.default_rng(4)
        x = rng.standard_normal(5)
        np.testing.assert_allclose(bias(state, x), np.zeros(5), atol=1e-10)

    def test_monte_carlo_mean_error(self):
        inst = make_instance(seed=10, n=7, mu=0.5, sigma2=0.2)
        d = SamplingVector.from_indices([0, 1, 4, 5], 7)
        state = build_state(inst, d)
        rng = np.random.default_rng(5)
        x = rng.standard_normal(7)
        trials = 10_000
        E = inst.noise_chol @ rng.standard_normal((7, trials))
        Y = d.values[:, None] * ((inst.h_m_mat @ x)[:, None] + E)
        errs = estimate(state, Y) - x[:, None]
        mean_err = errs.mean(axis=1)
        se = errs.std(axis=1, ddof=1) / np.sqrt(trials)
        b = bias(state, x)
        assert np.all(np.abs(mean_err - b) <= 3.0 * se + 1e-12)


class TestAnalyticMse:
    def test_equals_bcrb_at_reference(self):
        inst = make_instance(seed=11, n=6)
        state = build_state(inst, SamplingVector.from_indices([1, 2], 6))
        assert analytic_mse(state, inst.x0) == pytest.approx(bcrb(state), rel=1e-12)

    def test_full_identity_value(self):
        inst = full_identity_instance(n=5, sigma2=0.09, mu=0.0)
        state = build_state(inst, SamplingVector.full(5))
        rng = np.random.default_rng(6)
        assert analytic_mse(state, rng.standard_normal(5)) == pytest.approx(5 * 0.09,
                                                                            rel=1e-10)

    def test_monte_carlo_agreement(self):
        # Fixed x, noise-only randomness: empirical MSE within 2% at 1e5 draws.
        inst = make_instance(seed=12, n=8, mu=0.4, sigma2=0.05)
        d = SamplingVector.from_indices([0, 2, 3, 6], 8)
        state = build_state(inst, d)
        rng = np.random.default_rng(7)
        x = sample_prior(inst, rng)
        trials = 100_000
        E = inst.noise_chol @ rng.standard_normal((8, trials))
        Y = d.values[:, None] * ((inst.h_m_mat @ x)[:, None] + E)
        errs = ((estimate(state, Y) - x[:, None]) ** 2).sum(axis=0)
        assert errs.mean() == pytest.approx(analytic_mse(state, x), rel=0.02)

    def test_prior_average_equals_bmse(self):
        # Averaging the exact MSE over prior draws recovers tr(K^-1).
        inst = make_instance(seed=13, n=8, mu=0.4)
        d = SamplingVector.from_indices([0, 1, 5], 8)
        state = build_state(inst, d)
        rng = np.random.default_rng(8)
        draws = sample_prior(inst, rng, size=2000)
        avg = np.mean([analytic_mse(state, draws[:, t]) for t in range(2000)])
        assert avg == pytest.approx(float(np.trace(state.K_inv)), rel=0.05)


class TestBandlimited:
    def test_full_band_full_sampling_identity(self):
        inst = full_identity_instance(n=5, sigma2=1.0, mu=0.1)
        band = BandlimitedSpec(tuple(range(5)))
        y = np.arange(5.0)
        xhat = estimate_bandlimited(inst, band, SamplingVector.full(5), y)
        np.testing.assert_allclose(xhat, y, atol=1e-10)

    def test_exact_recovery_of_band_signal(self):
        inst = make_instance(seed=14, n=10, h_m=FilterSpec.diffusion(0.3))
        band = BandlimitedSpec((0, 1, 2, 3))
        rng = np.random.default_rng(9)
        x = band.basis(inst.decomp) @ rng.standard_normal(4)
        d = SamplingVector.from_indices([0, 2, 4, 5, 7, 9], 10)
        y = d.values * (inst.h_m_mat @ x)  # noiseless
        xhat = estimate_bandlimited(inst, band, d, y)
        np.testing.assert_allclose(xhat, x, atol=1e-8)
        # output stays in the band subspace
        U = band.basis(inst.decomp)
        np.testing.assert_allclose(U @ (U.T @ xhat), xhat, atol=1e-10)

    def test_observability_error(self):
        inst = make_instance(seed=14, n=10)
        band = BandlimitedSpec((0, 1, 2, 3))
        d = SamplingVector.from_indices([0, 1], 10)  # fewer samples than band size
        with pytest.raises(ObservabilityError):
            estimate_bandlimited(inst, band, d, np.zeros(10))

    def test_heavy_regularization_matches_gls(self):
        # The estimator with a dominant projector regularizer onto the band
        # complement converges to the bandlimited GLS solution.
        n = 10
        base = make_instance(seed=15, n=n, h_m=FilterSpec.diffusion(0.3), sigma2=0.01)
        band = BandlimitedSpec(tuple(range(4)))
        inst = ProblemInstance(
            decomp=base.decomp,
            h_m=base.h_m,
            h_r=FilterSpec.ideal_projector(band.complement(n)),
            noise_cov=base.noise_cov,
            mu=1e8,
            x0=np.zeros(n),
        )
        d = SamplingVector.from_indices([0, 1, 3, 4, 6, 8], n)
        rng = np.random.default_rng(10)
        x = band.basis(inst.decomp) @ rng.standard_normal(4)
        y = d.values * (inst.h_m_mat @ x + 0.1 * rng.standard_normal(n))
        gls = estimate_bandlimited(inst, band, d, y)
        state = build_state(inst, d)
        gfr = estimate(state, y)
        np.testing.assert_allclose(gfr, gls, rtol=1e-3, atol=1e-3 * np.abs(gls).max())


class TestAsymptoticLimit:
    def test_transformed_pseudoinverse_block_structure(self):
        # Dominant projector regularization: V^T K^+ V collapses onto the
        # inverse band-restricted measurement Gram matrix.
        n = 12
        base = make_instance(seed=16, n=n, h_m=FilterSpec.diffusion(0.3), sigma2=0.01)
        band = BandlimitedSpec(tuple(range(5)))
        inst = ProblemInstance(
            decomp=base.decomp,
            h_m=base.h_m,
            h_r=FilterSpec.ideal_projector(band.complement(n)),
            noise_cov=base.noise_cov,
            mu=1e8,
            x0=np.zeros(n),
        )
        d = SamplingVector.from_indices([0, 1, 2, 4, 6, 7, 9, 11], n)
        state = build_state(inst, d)
        V = inst.decomp.eigenvectors
        T = V.T @ state.K_inv @ V
        U = band.basis(inst.decomp)
        target = np.linalg.inv(U.T @ state.K_M @ U)
        in_b = list(band.indices)
        out_b = list(band.complement(n))
        block_err = np.abs(T[np.ix_(in_b, in_b)] - target).max() / np.abs(target).max()
        assert block_err <= 1e-3
        assert np.abs(T[np.ix_(in_b, out_b)]).max() <= 1e-6
        assert np.abs(T[np.ix_(out_b, out_b)]).max() <= 1e-6


def test_measurement_rank_utility():
    inst = make_instance(seed=17, n=6, h_m=FilterSpec.identity())
    assert measurement_rank(inst, SamplingVector.full(6)) == 6
    assert measurement_rank(inst, SamplingVector.from_indices([0, 3], 6)) == 2
    assert measurement_rank(inst, SamplingVector.empty(6)) == 0


def test_measurement_matrix_psd():
    inst = make_instance(seed=18, n=7)
    d = SamplingVector.from_indices([1, 2, 5], 7)
    M = measurement_matrix(inst, d)
    lam = np.linalg.eigvalsh(M)
    assert lam.min() >= -1e-10
