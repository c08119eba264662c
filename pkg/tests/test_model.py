import numpy as np
import pytest

from gsample.exceptions import InfeasibleError
from gsample.graphs import WeightedGraph
from gsample.model import (
    BandlimitedSpec,
    ProblemInstance,
    SamplingVector,
    as_sampling_vector,
    perturb_topology,
    sample_measurement,
    sample_prior,
)
from gsample.spectral import FilterSpec, filter_matrix, gft
from tests.conftest import make_instance


class TestSamplingVector:
    def test_binary_validation(self):
        SamplingVector(np.array([1.0, 0.0, 1.0]), budget=2)
        with pytest.raises(ValueError):
            SamplingVector(np.array([0.5, 0.0, 0.0]), budget=2)
        with pytest.raises(ValueError):
            SamplingVector(np.ones(3), budget=2)  # exceeds budget

    def test_relaxed_validation(self):
        SamplingVector.relaxed(np.array([0.5, 0.5, 0.5]), budget=1)
        with pytest.raises(ValueError):
            SamplingVector.relaxed(np.array([1.2, 0.0, 0.0]), budget=2)
        with pytest.raises(ValueError):
            SamplingVector.relaxed(np.ones(3), budget=2)  # norm^2 = 3 > 2

    def test_budget_bounds(self):
        with pytest.raises(ValueError):
            SamplingVector(np.zeros(3), budget=0)
        with pytest.raises(ValueError):
            SamplingVector(np.zeros(3), budget=4)

    def test_support_and_constructors(self):
        d = SamplingVector.from_indices([2, 0], 4)
        assert d.support == (0, 2)
        assert SamplingVector.full(3).values.sum() == 3
        assert SamplingVector.empty(3).values.sum() == 0

    def test_coercion(self):
        d = as_sampling_vector([1.0, 0.0], 2)
        assert d.mode == "binary"
        r = as_sampling_vector([0.4, 0.2], 2)
        assert r.mode == "relaxed"


class TestBandlimitedSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            BandlimitedSpec(())
        with pytest.raises(ValueError):
            BandlimitedSpec((-1,))
        assert BandlimitedSpec((3, 1, 1)).indices == (1, 3)

    def test_halves_and_complement(self):
        assert BandlimitedSpec.low_half(6).indices == (0, 1, 2)
        assert BandlimitedSpec.high_half(6).indices == (3, 4, 5)
        assert BandlimitedSpec((0, 2)).complement(4) == (1, 3)


class TestPrior:
    def test_identity_covariance_monte_carlo(self):
        # h_R = identity, mu = 1: empirical covariance of 1e5 draws ~ I.
        inst = make_instance(seed=0, n=6, h_r=FilterSpec.identity(), mu=1.0)
        rng = np.random.default_rng(7)
        X = sample_prior(inst, rng, size=100_000)
        C = np.cov(X)
        np.testing.assert_allclose(C, np.eye(6), atol=0.05)

    def test_mu_scales_variance(self):
        inst = make_instance(seed=0, n=6, h_r=FilterSpec.identity(), mu=4.0)
        rng = np.random.default_rng(8)
        X = sample_prior(inst, rng, size=100_000)
        np.testing.assert_allclose(X.var(axis=1), 0.25, rtol=0.05)

    def test_kernel_direction_never_excited(self):
        # Laplacian regularizer: the constant frequency must stay at x0. The
        # generator column for the kernel frequency is exactly zero, so no
        # draw can excite it; the transform round-trip only adds epsilon.
        inst = make_instance(seed=1, n=8, h_r=FilterSpec.laplacian_power(1), mu=0.7)
        assert np.all(inst.prior_half[:, 0] == 0.0)
        rng = np.random.default_rng(9)
        x = sample_prior(inst, rng)
        coeff = gft(inst.decomp, x - inst.x0)
        assert abs(coeff[0]) < 1e-14

    @pytest.mark.parametrize("h_r", [
        FilterSpec.laplacian_power(1),           # gmrf prior: cov (1/mu) L^+
        FilterSpec.tikhonov(0.2).dagger(),       # tikhonov^2 prior
    ])
    def test_covariance_matches_dagger(self, h_r):
        inst = make_instance(seed=2, n=8, h_r=h_r, mu=0.5)
        rng = np.random.default_rng(10)
        X = sample_prior(inst, rng, size=100_000)
        target = filter_matrix(inst.decomp, h_r.dagger()) / inst.mu
        scale = np.abs(target).max()
        np.testing.assert_allclose(np.cov(X), target, atol=0.05 * scale)

    def test_mu_zero_rejected(self):
        inst = make_instance(seed=0, n=5, mu=0.0)
        with pytest.raises(ValueError):
            sample_prior(inst, np.random.default_rng(0))


class TestMeasurement:
    def test_vanishing_noise(self):
        inst = make_instance(seed=3, n=7, h_m=FilterSpec.identity(), sigma2=1e-12)
        rng = np.random.default_rng(11)
        x = rng.standard_normal(7)
        y = sample_measurement(inst, x, SamplingVector.full(7), rng)
        np.testing.assert_allclose(y, x, atol=1e-5)

    def test_masking(self):
        inst = make_instance(seed=3, n=7)
        rng = np.random.default_rng(12)
        y = sample_measurement(inst, np.ones(7), SamplingVector.empty(7), rng)
        np.testing.assert_array_equal(y, np.zeros(7))
        d = SamplingVector.from_indices([1, 4], 7)
        y = sample_measurement(inst, np.ones(7), d, rng)
        assert np.all(y[[0, 2, 3, 5, 6]] == 0.0)

    def test_masked_noise_covariance(self):
        inst = make_instance(seed=4, n=6, sigma2=0.3)
        d = SamplingVector.from_indices([0, 2, 5], 6)
        rng = np.random.default_rng(13)
        x = np.zeros(6)
        Y = np.stack([sample_measurement(inst, x, d, rng) for _ in range(40_000)], axis=1)
        target = np.diag(d.values) @ inst.noise_cov @ np.diag(d.values)
        np.testing.assert_allclose(np.cov(Y), target, atol=0.05 * 0.3)


class TestInstanceValidation:
    def test_negative_regularizer_rejected(self):
        with pytest.raises(ValueError):
            make_instance(seed=0, n=5, h_r=FilterSpec.custom((-1.0, 1.0, 1.0, 1.0, 1.0)))

    def test_non_pd_noise_rejected(self):
        inst = make_instance(seed=0, n=4)
        with pytest.raises(ValueError):
            ProblemInstance(decomp=inst.decomp, h_m=inst.h_m, h_r=inst.h_r,
                            noise_cov=np.zeros((4, 4)), mu=0.1, x0=np.zeros(4))

    def test_x0_kernel_component_warns(self):
        inst = make_instance(seed=0, n=5)
        with pytest.warns(UserWarning, match="kernel"):
            ProblemInstance(decomp=inst.decomp, h_m=inst.h_m,
                            h_r=FilterSpec.laplacian_power(1),
                            noise_cov=np.eye(5), mu=0.1, x0=np.ones(5))


class TestPerturbTopology:
    def test_delta_zero_is_identity(self, triangle):
        rng = np.random.default_rng(0)
        assert perturb_topology(triangle, 0, rng) == triangle

    def test_triangle_removal_branch(self, triangle):
        from gsample.graphs import is_connected
        for seed in range(60):
            out, ops = perturb_topology(triangle, 1, np.random.default_rng(seed),
                                        return_ops=True)
            if ops[0][0] == "remove":
                assert out.n_edges == 2
                assert is_connected(out)
                return
        pytest.fail("no removal branch hit in 60 seeds")

    def test_bookkeeping_matches_ops(self):
        rng = np.random.default_rng(21)
        from tests.conftest import er_decomposition
        graph, _ = er_decomposition(seed=5, n=10)
        out, ops = perturb_topology(graph, 6, rng, return_ops=True)
        assert len(ops) == 6
        delta_edges = sum(1 if op == "add" else -1 for op, _, _ in ops)
        assert out.n_edges - graph.n_edges == delta_edges
        from gsample.graphs import is_connected
        assert is_connected(out)

    def test_single_edge_graph_infeasible(self):
        # No pair to add, and removing the only edge disconnects: must fail.
        g = WeightedGraph(2, ((0, 1, 1.0),))
        with pytest.raises(InfeasibleError):
            perturb_topology(g, 1, np.random.default_rng(0))
