"""Measure-level fixed point, transport route and the coherence bridge."""

import numpy as np
import pytest

from delaykinetic import (DelayKernel, DelayMeasure, DiscreteMeasure,
                          FixedPointConfig, HistoryPath, IntegratorConfig,
                          MeasureCurve, NonConvergenceError, bounded_confidence,
                          coherence_check, compose_imperfect, gamma, initial_freeze,
                          linear_attraction, pheromone, pure_delay_linear,
                          sample_initial_paths, simulate_imperfect,
                          simulate_particles, solve_fixed_point, solve_transport,
                          wasserstein1, wasserstein1_paths)

TAU = 0.5


def integ(dt=0.02, scheme="euler", T=2.0):
    return IntegratorConfig(dt, scheme, T)


def fp(dt=0.02, scheme="euler", T=2.0, tol=1e-10, max_iters=200):
    return FixedPointConfig(integ(dt, scheme, T), tol, max_iters)


def constant_measure(points, tau=TAU):
    return DiscreteMeasure([HistoryPath.constant(p, tau) for p in np.atleast_2d(points)])


def zero_kernel(dim=1, tau=TAU):
    return DelayKernel("null", lambda x, sigma: np.zeros_like(x), 1.0, dim, tau)


def consensus_kernel(dim=1, tau=TAU):
    return compose_imperfect(linear_attraction(dim), DelayMeasure.delta_zero(), tau)


class TestGamma:
    def test_zero_field_keeps_constant_atoms(self):
        mu_in = constant_measure([[0.0], [1.0], [-2.0]])
        frozen = initial_freeze(mu_in, integ())
        out = gamma(frozen, mu_in, zero_kernel(), integ())
        for t in out.times:
            assert wasserstein1_paths(out.measure_at(t), mu_in) == pytest.approx(0.0,
                                                                                 abs=1e-14)

    def test_initial_time_identity(self):
        rng = np.random.default_rng(0)
        paths = sample_initial_paths(rng, "affine", 6, 2, 1.0, TAU, 26)
        mu_in = DiscreteMeasure(paths)
        frozen = initial_freeze(mu_in, integ())
        out = gamma(frozen, mu_in, consensus_kernel(2), integ())
        assert wasserstein1_paths(out.measure_at(0.0), mu_in) == pytest.approx(0.0,
                                                                               abs=1e-14)

    def test_single_atom_dirac_curve(self):
        mu_in = constant_measure([[1.0]])
        frozen = initial_freeze(mu_in, integ())
        out = gamma(frozen, mu_in, consensus_kernel(), integ())
        assert out.num_atoms == 1
        for t in out.times:
            assert out.measure_at(t).num_atoms == 1


class TestSolveFixedPoint:
    def test_zero_field_converges_in_one_iteration(self):
        mu_in = constant_measure([[0.3], [-0.7]])
        curve, trace = solve_fixed_point(mu_in, zero_kernel(), fp())
        assert len(trace) == len({row[1] for row in trace})  # one pass per window
        frozen = initial_freeze(mu_in, integ())
        assert np.array_equal(curve.states, frozen.states)

    def test_matches_particle_simulation(self):
        rng = np.random.default_rng(1)
        paths = sample_initial_paths(rng, "affine", 8, 1, 1.0, TAU, 26)
        kernel = consensus_kernel()
        cfg = integ()
        curve, _ = solve_fixed_point(DiscreteMeasure(paths), kernel, fp())
        trajs = simulate_particles(kernel, paths, cfg)
        gap = 0.0
        for t in curve.times:
            nu = DiscreteMeasure(np.stack([tr.evaluate(t) for tr in trajs]))
            gap = max(gap, wasserstein1(curve.position_measure_at(t), nu))
        assert gap <= 1e-8

    def test_single_atom_delayed_cosine(self):
        tau = np.pi / 2
        m = 100
        grid = np.linspace(-tau, 0.0, m + 1)
        mu_in = DiscreteMeasure([HistoryPath(grid, np.cos(grid)[:, None])])
        cfg = FixedPointConfig(IntegratorConfig(tau / m, "euler", 2 * tau), tol=1e-10)
        curve, _ = solve_fixed_point(mu_in, pure_delay_linear(tau), cfg)
        values = curve.states[:, 0, 0]
        # single atom: fixed point is the particle solution, euler accuracy O(dt)
        assert np.max(np.abs(values - np.cos(curve.grid))) < 5e-2

    def test_fixed_point_residual(self):
        rng = np.random.default_rng(2)
        paths = sample_initial_paths(rng, "constant", 6, 2, 1.0, TAU, 26)
        mu_in = DiscreteMeasure(paths)
        kernel = pheromone(TAU, dim=2)
        fpc = fp()
        curve, _ = solve_fixed_point(mu_in, kernel, fpc)
        again = gamma(curve, mu_in, kernel, fpc.integrator)
        gap = max(wasserstein1_paths(curve.measure_at(t), again.measure_at(t))
                  for t in curve.times)
        assert gap <= 2 * fpc.tol

    def test_support_stays_bounded(self):
        rng = np.random.default_rng(3)
        paths = sample_initial_paths(rng, "constant", 10, 2, 1.0, TAU, 26)
        mu_in = DiscreteMeasure(paths)
        r0 = max(p.sup_norm() for p in paths)
        kernel = pheromone(TAU, dim=2)
        curve, _ = solve_fixed_point(mu_in, kernel, fp())
        window = min(2.0, 0.5 / kernel.lipschitz_L)
        early = curve.grid <= window + 1e-12
        assert np.linalg.norm(curve.states[early], axis=-1).max() <= 2 * r0 + 1e-9

    def test_nonconvergence_reports_trace(self):
        mu_in = constant_measure([[1.0], [0.0]])
        with pytest.raises(NonConvergenceError) as err:
            solve_fixed_point(mu_in, consensus_kernel(), fp(tol=1e-16, max_iters=1))
        assert err.value.trace  # residual history attached


class TestSolveTransport:
    def _initial_curve(self, points, tau=TAU, dt=0.02):
        m = int(round(tau / dt))
        times = np.arange(-m, 1, dtype=float) * dt
        measures = [DiscreteMeasure(np.atleast_2d(points)) for _ in times]
        return MeasureCurve(times, measures, tau)

    def test_zero_field_is_static(self):
        kt = linear_attraction(1)
        frozen_kt = kt.__class__("null", lambda x, y: np.zeros(
            np.broadcast_shapes(x.shape, y.shape)), 1.0, 1)
        curve, _ = solve_transport(self._initial_curve([[0.2], [0.9]]), frozen_kt,
                                   DelayMeasure.delta_zero(), fp())
        for mu in curve.measures:
            assert np.allclose(np.sort(mu.atoms[:, 0]), [0.2, 0.9])

    def test_linear_consensus_closed_form(self):
        # symmetric +-1 data contracts toward the conserved mean as +-exp(-t)
        curve, _ = solve_transport(self._initial_curve([[-1.0], [1.0]], dt=0.001),
                                   linear_attraction(1), DelayMeasure.delta_zero(),
                                   fp(dt=0.001, T=1.0))
        target = DiscreteMeasure(np.array([[-np.exp(-1.0)], [np.exp(-1.0)]]))
        assert wasserstein1(curve.at(1.0), target) <= 1e-3

    def test_matches_imperfect_particle_route(self):
        rng = np.random.default_rng(4)
        kt = bounded_confidence(1.5, 2)
        rho = DelayMeasure.exponential(TAU, 2.0, 4)
        points = rng.uniform(-1, 1, size=(7, 2))
        curve, _ = solve_transport(self._initial_curve(points), kt, rho, fp())
        paths = [HistoryPath.constant(p, TAU) for p in points]
        trajs = simulate_imperfect(kt, rho, paths, integ())
        gap = 0.0
        for i, t in enumerate(curve.times):
            nu = DiscreteMeasure(np.stack([tr.evaluate(t) for tr in trajs]))
            gap = max(gap, wasserstein1(curve.measures[i], nu))
        assert gap <= 1e-8

    def test_weak_form_residual(self):
        # d/dt int phi dmu = int F . grad phi dmu for the transport solution
        rng = np.random.default_rng(5)
        kt = linear_attraction(2)
        rho = DelayMeasure(np.array([-TAU, 0.0]), np.array([0.5, 0.5]))
        points = rng.uniform(-1, 1, size=(6, 2))
        dt = 0.005
        curve, _ = solve_transport(self._initial_curve(points, dt=dt), kt, rho,
                                   fp(dt=dt, T=1.0))
        m = int(round(TAU / dt))
        c = np.array([0.3, -0.2])

        def phi(x):
            return np.exp(-np.sum((x - c) ** 2, axis=-1))

        def grad_phi(x):
            return -2.0 * (x - c) * phi(x)[..., None]

        times = curve.times[curve.times >= -1e-12]
        pos = np.stack([mu.atoms for mu in curve.measures])  # (nodes, N, 2)
        w = curve.measures[0].weights

        def field(node):
            x = pos[node]
            out = np.zeros_like(x)
            for s, ws in zip(rho.times, rho.weights):
                y = pos[node + int(round(s / dt))]
                out += ws * (kt.func(x[:, None, :], y[None, :, :]) * w[None, :, None]).sum(1)
            return out

        lhs = np.array([phi(pos[m + k]) @ w for k in range(len(times))])
        rates = np.array([(grad_phi(pos[m + k]) * field(m + k)).sum(-1) @ w
                          for k in range(len(times))])
        rhs = lhs[0] + np.concatenate([[0.0], np.cumsum(
            0.5 * (rates[1:] + rates[:-1]) * dt)])
        assert np.max(np.abs(lhs - rhs)) <= 5 * dt


class TestCoherence:
    def test_zero_field_gap_vanishes(self):
        mu_in = constant_measure([[0.1], [0.8]])
        kt = linear_attraction(1).__class__("null", lambda x, y: np.zeros(
            np.broadcast_shapes(x.shape, y.shape)), 1.0, 1)
        report = coherence_check(mu_in, kt, DelayMeasure.delta_zero(), fp())
        assert report.max_gap == 0.0

    def test_linear_delta_zero_routes_agree(self):
        mu_in = constant_measure([[1.0], [-1.0]])
        report = coherence_check(mu_in, linear_attraction(1),
                                 DelayMeasure.delta_zero(), fp())
        assert report.max_gap <= 1e-8
        assert report.compatibility_gap <= 1e-10

    def test_pheromone_routes_agree(self):
        rng = np.random.default_rng(6)
        paths = sample_initial_paths(rng, "affine", 12, 2, 1.0, TAU, 26)
        kernel = pheromone(TAU, dim=2)
        fpc = fp()
        report = coherence_check(DiscreteMeasure(paths), kernel.point_kernel,
                                 kernel.delay_measure, fpc)
        assert report.max_gap <= 10 * fpc.tol

    def test_compatibility_identity(self):
        rng = np.random.default_rng(7)
        paths = sample_initial_paths(rng, "constant", 5, 1, 1.0, TAU, 26)
        report = coherence_check(DiscreteMeasure(paths), linear_attraction(1),
                                 DelayMeasure.delta(-TAU), fp())
        assert report.compatibility_gap <= 1e-10
