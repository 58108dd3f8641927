from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sparse

from diffres_diffusion import (
    DENSE_OPERATOR_LIMIT,
    DiffusionConfig,
    DiffusionError,
    check_stability,
    diffuse,
    diffuse_backward,
    diffusion_backward,
    diffusion_closed_form,
    diffusion_operator,
    diffusion_step,
    iteration_matrix,
    largest_laplacian_eigenvalue,
    spectral_radius,
    stability_max_step,
)
from diffres_graph import SparseWeights, graph_laplacian


@pytest.fixture
def triangle():
    """Unit-weight triangle: degrees 2, Laplacian spectrum {0, 3, 3}."""
    return SparseWeights.from_dense(np.ones((3, 3)) - np.eye(3))


class TestDiffusionConfig:
    def test_rejects_negative(self):
        with pytest.raises(DiffusionError):
            DiffusionConfig(gamma=-0.1, steps=1)
        with pytest.raises(DiffusionError):
            DiffusionConfig(gamma=0.1, steps=-1)

    def test_active(self):
        assert DiffusionConfig(0.5, 3).active
        assert not DiffusionConfig(0.5, 0).active
        assert not DiffusionConfig(0.0, 3).active


class TestDiffuse:
    def test_zero_steps_is_identity(self, make_weights):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(3, 30))
            w = make_weights(seed, n)
            x = rng.standard_normal((n, 3))
            out = diffuse(x, w, DiffusionConfig(gamma=0.7, steps=0))
            np.testing.assert_array_equal(out, x)
            assert out is not x

    def test_single_step_formula(self, two_node):
        x = np.array([[1.0], [3.0]])
        out = diffusion_step(x, two_node, 0.25)
        np.testing.assert_allclose(out, [[1.5], [2.5]])

    def test_preserves_column_sums(self, cloud_weights, rng):
        x = rng.standard_normal((cloud_weights.n, 2))
        out = diffuse(x, cloud_weights, DiffusionConfig(stability_max_step(cloud_weights), 25))
        np.testing.assert_allclose(out.sum(axis=0), x.sum(axis=0), atol=1e-10)

    def test_row_mismatch(self, two_node):
        with pytest.raises(DiffusionError):
            diffuse(np.zeros((3, 1)), two_node, DiffusionConfig(0.5, 1))

    def test_constant_signal_is_fixed(self, cloud_weights):
        x = np.ones((cloud_weights.n, 1))
        out = diffuse(x, cloud_weights, DiffusionConfig(stability_max_step(cloud_weights), 10))
        np.testing.assert_allclose(out, x, atol=1e-12)

    def test_adjoint_identity(self, cloud_weights, rng):
        x = rng.standard_normal((cloud_weights.n, 3))
        y = rng.standard_normal((cloud_weights.n, 3))
        gamma = 0.5 * stability_max_step(cloud_weights)
        lhs = np.sum(diffusion_step(x, cloud_weights, gamma) * y)
        rhs = np.sum(x * diffusion_backward(y, cloud_weights, gamma))
        assert lhs == pytest.approx(rhs, rel=1e-12)
        cfg = DiffusionConfig(gamma, 4)
        lhs = np.sum(diffuse(x, cloud_weights, cfg) * y)
        rhs = np.sum(x * diffuse_backward(y, cloud_weights, cfg))
        assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_fused_operator_matches_steps(self, cloud_weights, rng):
        x = rng.standard_normal((cloud_weights.n, 2))
        cfg = DiffusionConfig(0.8 * stability_max_step(cloud_weights), 37)
        operator = diffusion_operator(cloud_weights, cfg)
        np.testing.assert_allclose(operator @ x, diffuse(x, cloud_weights, cfg), rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(operator, operator.T, atol=1e-12)

    def test_fused_operator_inactive_and_guarded(self, two_node):
        np.testing.assert_array_equal(diffusion_operator(two_node, DiffusionConfig(0.5, 0)), np.eye(2))
        with pytest.raises(DiffusionError):
            diffusion_operator(two_node, DiffusionConfig(2.0, 3))

    def test_fused_operator_size_limit(self):
        big = SparseWeights(sparse.csr_matrix((DENSE_OPERATOR_LIMIT + 1, DENSE_OPERATOR_LIMIT + 1)))
        with pytest.raises(DiffusionError, match="dense operator limit"):
            diffusion_operator(big, DiffusionConfig(0.5, 40))


class TestLinearAlgebra:
    def test_step_is_linear(self, make_weights):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(5, 40))
            w = make_weights(seed, n)
            gamma = stability_max_step(w) * rng.uniform(0.1, 1.0)
            x = rng.standard_normal((n, 3))
            y = rng.standard_normal((n, 3))
            a, b = rng.normal(size=2) * 3.0
            lhs = diffusion_step(a * x + b * y, w, gamma)
            rhs = a * diffusion_step(x, w, gamma) + b * diffusion_step(y, w, gamma)
            np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)

    def test_norm_never_grows_below_gamma_max(self, make_weights):
        for seed in range(30):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(5, 50))
            w = make_weights(seed, n, n_top=int(rng.integers(2, 8)))
            gamma_max = stability_max_step(w)
            x = rng.standard_normal((n, 2)) * 10.0
            for fraction in (0.25, 0.5, 1.0):
                out = diffuse(x, w, DiffusionConfig(fraction * gamma_max, int(rng.integers(1, 30))))
                assert np.linalg.norm(out) <= np.linalg.norm(x) * (1.0 + 1e-9)
                for col in range(x.shape[1]):
                    assert np.linalg.norm(out[:, col]) <= np.linalg.norm(x[:, col]) * (1.0 + 1e-9)


class TestStability:
    def test_two_node_bounds(self, two_node):
        assert stability_max_step(two_node) == 1.0
        assert spectral_radius(iteration_matrix(two_node, 1.0)) == pytest.approx(1.0)
        assert spectral_radius(iteration_matrix(two_node, 2.0)) == pytest.approx(3.0)
        check_stability(two_node, 1.0)
        with pytest.raises(DiffusionError):
            check_stability(two_node, 2.0)

    def test_spectral_fallback_admits_larger_step(self, triangle):
        assert stability_max_step(triangle) == 0.5
        assert largest_laplacian_eigenvalue(triangle) == pytest.approx(3.0)
        check_stability(triangle, 0.6)
        with pytest.raises(DiffusionError):
            check_stability(triangle, 0.7)

    def test_guard_off_skips_check(self, two_node):
        x = np.array([[1.0], [0.0]])
        out = diffuse(x, two_node, DiffusionConfig(gamma=2.0, steps=1, guard=False))
        np.testing.assert_allclose(out, [[-1.0], [2.0]])
        with pytest.raises(DiffusionError):
            diffuse(x, two_node, DiffusionConfig(gamma=2.0, steps=1))

    def test_gamma_max_radius_on_random_graphs(self, make_weights):
        for seed in range(10):
            w = make_weights(seed, 40)
            rho = spectral_radius(iteration_matrix(w, stability_max_step(w)))
            assert rho == pytest.approx(1.0, abs=1e-9)


class TestClosedForm:
    def test_matches_euler_limit(self, make_weights, rng):
        w = make_weights(7, 20)
        x0 = rng.standard_normal((20, 2))
        exact = diffusion_closed_form(x0, graph_laplacian(w), gamma=1.0, t=1.0)
        approx = diffuse(x0, w, DiffusionConfig(gamma=1.0 / 1000, steps=1000))
        rel = np.linalg.norm(approx - exact) / np.linalg.norm(exact)
        assert rel < 1e-3

    def test_first_order_convergence(self, make_weights, rng):
        w = make_weights(3, 15)
        x0 = rng.standard_normal((15, 1))
        exact = diffusion_closed_form(x0, graph_laplacian(w), gamma=1.0, t=1.0)
        e1 = np.linalg.norm(diffuse(x0, w, DiffusionConfig(1.0 / 200, 200)) - exact)
        e2 = np.linalg.norm(diffuse(x0, w, DiffusionConfig(0.5 / 200, 400)) - exact)
        assert 1.8 <= e1 / e2 <= 2.2

    def test_vector_input(self, two_node):
        out = diffusion_closed_form(np.array([1.0, -1.0]), graph_laplacian(two_node), gamma=1.0, t=0.5)
        # antisymmetric mode has eigenvalue 2
        np.testing.assert_allclose(out.ravel(), np.exp(-1.0) * np.array([1.0, -1.0]))
