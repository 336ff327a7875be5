"""Interaction kernels: Lipschitz certificates, delay-measure composition,
path-swap invariance and the builtin model library."""

import numpy as np
import pytest

from delaykinetic import (BUILTIN_MODELS, ConfigError, DelayMeasure, HistoryPath,
                          PointKernel, ShapeError, bounded_confidence,
                          compose_imperfect, kuramoto, linear_attraction, pheromone,
                          pure_delay_linear, splice)

RNG = np.random.default_rng(2024)


def random_history(rng, dim, tau=1.0, nodes=9, scale=2.0):
    grid = np.linspace(-tau, 0.0, nodes)
    return HistoryPath(grid, rng.normal(scale=scale, size=(nodes, dim)))


class TestDelayMeasure:
    def test_delta_zero(self):
        rho = DelayMeasure.delta_zero()
        assert rho.times.tolist() == [0.0]
        assert rho.weights.tolist() == [1.0]

    def test_weights_must_normalize(self):
        with pytest.raises(ShapeError):
            DelayMeasure(np.array([-0.5, 0.0]), np.array([0.5, 0.6]))

    def test_positive_times_rejected(self):
        with pytest.raises(ShapeError):
            DelayMeasure(np.array([0.5]), np.array([1.0]))

    def test_exponential_fades_toward_old_times(self):
        rho = DelayMeasure.exponential(tau=1.0, decay=2.0, num=6)
        assert np.all(np.diff(rho.weights) > 0)  # oldest (s=-tau) smallest
        assert rho.weights.sum() == pytest.approx(1.0)

    def test_span_check(self):
        rho = DelayMeasure.delta(-1.0)
        with pytest.raises(ShapeError):
            rho.check_span(0.5)


class TestComposeImperfect:
    def test_delta_zero_reduction_exact(self):
        kt = linear_attraction(2)
        k = compose_imperfect(kt, DelayMeasure.delta_zero(), tau=1.0)
        rng = np.random.default_rng(0)
        for _ in range(25):
            x = rng.normal(size=2)
            sigma = random_history(rng, 2)
            assert np.array_equal(k.evaluate(x, sigma), kt.evaluate(x, sigma.evaluate(0.0)))

    def test_constant_kernel_stays_constant(self):
        v = np.array([1.0, -2.0])
        kt = PointKernel("const", lambda x, y: np.broadcast_to(v, np.broadcast_shapes(
            x.shape, y.shape)), 1.0, 2)
        rho = DelayMeasure(np.array([-1.0, -0.3, 0.0]), np.array([0.2, 0.3, 0.5]))
        k = compose_imperfect(kt, rho, tau=1.0)
        sigma = random_history(np.random.default_rng(1), 2)
        assert np.allclose(k.evaluate(np.zeros(2), sigma), v)

    def test_hand_quadrature_two_atoms(self):
        # K~(x,y) = y - x, rho uniform on {-tau, 0}, sigma(s) = s, x = 0, tau = 1
        kt = linear_attraction(1)
        rho = DelayMeasure(np.array([-1.0, 0.0]), np.array([0.5, 0.5]))
        k = compose_imperfect(kt, rho, tau=1.0)
        sigma = HistoryPath(np.linspace(-1, 0, 11), np.linspace(-1, 0, 11))
        assert k.evaluate(np.array([0.0]), sigma)[0] == pytest.approx(-0.5)

    def test_lipschitz_constant_preserved(self):
        kt = bounded_confidence(1.0, 2)
        k = compose_imperfect(kt, DelayMeasure.exponential(1.0, 1.0, 4), tau=1.0)
        assert k.lipschitz_L == kt.lipschitz_L

    def test_atoms_beyond_tau_rejected(self):
        with pytest.raises(ShapeError):
            compose_imperfect(linear_attraction(1), DelayMeasure.delta(-2.0), tau=1.0)


POINT_KERNELS = [
    (linear_attraction(1), 1),
    (linear_attraction(3), 3),
    (bounded_confidence(1.0, 2), 2),
    (bounded_confidence(0.5, 1), 1),
    (kuramoto(1.0), 1),
    (kuramoto(2.5), 1),
]


class TestLipschitzCertificates:
    @pytest.mark.parametrize("kernel,dim", POINT_KERNELS,
                             ids=lambda k: getattr(k, "name", str(k)))
    def test_point_kernel_certificate(self, kernel, dim):
        # strict sampled test of the declared constant over 1e4 random pairs
        rng = np.random.default_rng(99)
        n = 10_000
        x, xb = rng.normal(scale=2.0, size=(2, n, dim))
        y, yb = rng.normal(scale=2.0, size=(2, n, dim))
        lhs = np.linalg.norm(kernel.evaluate(x, y) - kernel.evaluate(xb, yb), axis=1)
        rhs = kernel.lipschitz_L * (np.linalg.norm(x - xb, axis=1)
                                    + np.linalg.norm(y - yb, axis=1))
        assert np.all(lhs <= rhs * (1.0 + 1e-12))

    @pytest.mark.parametrize("kernel", [
        compose_imperfect(linear_attraction(2), DelayMeasure.exponential(1.0, 2.0, 4), 1.0),
        pure_delay_linear(1.0, 2),
        pheromone(1.0, dim=2),
    ], ids=lambda k: k.name)
    def test_delay_kernel_certificate(self, kernel):
        rng = np.random.default_rng(123)
        for _ in range(300):
            x, xb = rng.normal(scale=2.0, size=(2, kernel.dim))
            sigma = random_history(rng, kernel.dim)
            sigma_b = random_history(rng, kernel.dim)
            lhs = np.linalg.norm(kernel.evaluate(x, sigma) - kernel.evaluate(xb, sigma_b))
            gap = np.linalg.norm(sigma.values - sigma_b.values, axis=1).max()
            rhs = kernel.lipschitz_L * (np.linalg.norm(x - xb) + gap)
            assert lhs <= rhs * (1.0 + 1e-12) + 1e-15


class TestPathSwapInvariance:
    def test_imperfect_sum_identity(self):
        # splicing two paths at a crossing time cannot change the summed field
        rng = np.random.default_rng(7)
        kt = bounded_confidence(1.5, 1)
        rho = DelayMeasure.exponential(1.0, 1.5, 5)
        k = compose_imperfect(kt, rho, tau=1.0)
        grid = np.linspace(-1.0, 0.0, 33)
        for _ in range(100):
            a_vals = rng.normal(size=(33, 1))
            h_idx = int(rng.integers(1, 32))
            b_vals = rng.normal(size=(33, 1))
            b_vals[h_idx] = a_vals[h_idx]  # force a crossing at a grid node
            a = HistoryPath(grid, a_vals)
            b = HistoryPath(grid, b_vals)
            h = grid[h_idx]
            s1, s2 = splice(a, b, h), splice(b, a, h)
            x = rng.normal(size=1)
            orig = k.evaluate(x, a) + k.evaluate(x, b)
            swapped = k.evaluate(x, s1) + k.evaluate(x, s2)
            scale = max(1.0, np.abs(orig).max())
            assert np.all(np.abs(orig - swapped) <= 1e-12 * scale)


class TestBuiltins:
    def test_catalog_contents(self):
        assert set(BUILTIN_MODELS) == {"bounded_confidence", "kuramoto",
                                       "linear_attraction", "pheromone",
                                       "pure_delay_linear"}

    def test_kuramoto_quarter_turn(self):
        assert kuramoto(1.0).evaluate(np.array([0.0]), np.array([np.pi / 2]))[0] \
            == pytest.approx(1.0)

    def test_linear_attraction_pairwise(self):
        k = linear_attraction(1)
        assert k.evaluate(np.array([1.0]), np.array([3.0]))[0] == pytest.approx(2.0)

    def test_pure_delay_reads_oldest_value(self):
        k = pure_delay_linear(1.0, 1)
        sigma = HistoryPath(np.linspace(-1, 0, 5), np.linspace(5.0, 9.0, 5))
        assert k.evaluate(np.array([42.0]), sigma)[0] == pytest.approx(-5.0)

    def test_bounded_confidence_cutoff(self):
        k = bounded_confidence(1.0, 1)
        near = k.evaluate(np.array([0.0]), np.array([0.3]))[0]
        far = k.evaluate(np.array([0.0]), np.array([2.0]))[0]
        assert near == pytest.approx(0.3)   # inside the plateau
        assert far == pytest.approx(0.0)    # beyond the cutoff radius

    def test_pheromone_is_composite(self):
        k = pheromone(0.5)
        assert k.is_composite
        assert np.all(np.diff(k.delay_measure.weights) > 0)

    def test_invalid_parameters_rejected(self):
        with pytest.raises(ConfigError):
            bounded_confidence(-1.0)
        with pytest.raises(ConfigError):
            kuramoto(0.0)
        with pytest.raises(ConfigError):
            pure_delay_linear(0.0)
        with pytest.raises(ConfigError):
            linear_attraction(0)

    def test_growth_constant(self):
        # |K(0, 0)| = 0 for all odd builtins, so C falls back to L
        assert pure_delay_linear(1.0).growth_constant() == pytest.approx(1.0)
        assert pheromone(1.0).growth_constant() == pytest.approx(2.0)
