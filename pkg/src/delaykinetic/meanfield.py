"""Measure-level solvers: Picard iteration of the push-forward fixed point.

Two routes are provided.  The path-space route iterates
mu -> (restrict . extend[mu]) # mu_in on curves of measures over history
segments (perfect memory).  The state-space transport route pushes mu_in(0)
forward by the flow of the delay-averaged field (imperfect memory).  Both
share the same frozen-field integration core, so at their fixed points the
discrete recursions coincide with the coupled particle scheme under the euler
scheme (delayed reads then only ever hit grid nodes).

Contraction holds only on a short window depending on the kernel's Lipschitz
constant; longer horizons are solved by windowed continuation, freezing the
converged prefix and iterating window by window.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .dde import (FlowMap, IntegratorConfig, _advance, _composite_rhs,
                  _generic_rhs, _Guard, _resample_histories)
from .errors import ConfigError, NonConvergenceError, ShapeError
from .kernels import DelayKernel, DelayMeasure, PointKernel, compose_imperfect
from .measures import DiscreteMeasure, MeasureCurve, wasserstein1
from .paths import HistoryPath, Trajectory

_ALIGN_TOL = 1e-9

#: fraction of 1/L used as the contraction window length (conservative)
WINDOW_FACTOR = 0.5


@dataclass(frozen=True)
class FixedPointConfig:
    """Tolerance and iteration budget for the Picard solves."""

    integrator: IntegratorConfig
    tol: float = 1e-10
    max_iters: int = 200

    def __post_init__(self):
        if self.tol <= 0 or self.max_iters < 1:
            raise ConfigError("tol must be positive and max_iters at least 1")


@dataclass(frozen=True)
class PathMeasureCurve:
    """A curve t -> mu(t) in Prob(path space), stored through its atom states.

    `states` holds the atom trajectories time-major on the uniform grid
    spanning [-tau, T]; the measure at a grid time t is the weighted set of
    trailing windows of length tau.
    """

    grid: np.ndarray
    states: np.ndarray  # (num_nodes, num_atoms, d)
    weights: np.ndarray
    tau: float
    history_nodes: int  # m: index of t = 0 in the grid

    def __post_init__(self):
        object.__setattr__(self, "grid", np.asarray(self.grid, dtype=float))
        object.__setattr__(self, "states", np.asarray(self.states, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))

    @property
    def times(self) -> np.ndarray:
        """The grid restricted to [0, T]."""
        return self.grid[self.history_nodes:]

    @property
    def dt(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def num_atoms(self) -> int:
        return self.states.shape[1]

    @property
    def dim(self) -> int:
        return self.states.shape[2]

    def _node(self, t: float) -> int:
        idx = int(round(t / self.dt)) + self.history_nodes
        if idx < 0 or idx >= len(self.grid) or abs(self.grid[idx] - t) > _ALIGN_TOL * (1 + abs(t)):
            raise ShapeError(f"time {t} is not a grid node of the curve")
        return idx

    def measure_at(self, t: float) -> DiscreteMeasure:
        """mu(t): the weighted atoms of window paths at grid time t."""
        i = self._node(t)
        m = self.history_nodes
        win_grid = self.grid[i - m: i + 1] - self.grid[i]
        atoms = [HistoryPath(win_grid, self.states[i - m: i + 1, a, :])
                 for a in range(self.num_atoms)]
        return DiscreteMeasure(atoms, self.weights)

    def position_measure_at(self, t: float) -> DiscreteMeasure:
        """ev(0) # mu(t): the endpoint positions at grid time t."""
        i = self._node(t)
        return DiscreteMeasure(self.states[i], self.weights)

    def position_curve(self) -> MeasureCurve:
        """The full state-space curve t -> ev(0) # mu(t) on [-tau, T]."""
        measures = [DiscreteMeasure(row, self.weights) for row in self.states]
        return MeasureCurve(self.grid, measures, self.tau)

    def atom_trajectories(self) -> List[Trajectory]:
        return [Trajectory(self.grid, self.states[:, a, :], self.tau)
                for a in range(self.num_atoms)]

    def flow_map(self, kernel: DelayKernel, config: IntegratorConfig) -> FlowMap:
        return FlowMap(kernel, self.states, self.weights, config, tau=self.tau)


def _frozen_rhs(kernel: DelayKernel, frozen: np.ndarray, m: int, dt: float,
                weights: np.ndarray):
    if kernel.is_composite:
        return _composite_rhs(kernel, frozen, m, dt, weights=weights, self_coupled=False)
    return _generic_rhs(kernel, frozen, m, dt, weights=weights, self_coupled=False)


def _integrate_window(kernel, storage, frozen, weights, m, dt, scheme, start, end):
    """Advance `storage` on steps (start, end] under the field frozen in `frozen`."""
    rhs = _frozen_rhs(kernel, frozen, m, dt, weights)
    n_known = frozen.shape[0] - 1
    x = storage[m + start].copy()
    for step in range(start, end):
        def f(pos, y, _nk=n_known):
            return rhs(pos, y, _nk)

        x = _advance(f, float(step), x, dt, scheme)
        storage[m + step + 1] = x


def _residual_bound(old, new, weights, m, start, end, path_metric) -> float:
    """Upper bound on the per-time W1 gap between iterates via identity coupling.

    Both iterates carry the same atoms, so transporting each atom to its
    successor bounds W1 from above; the bound is zero iff the iterates agree.
    """
    gap = np.linalg.norm(old - new, axis=2)
    if path_metric:
        win = sliding_window_view(gap, m + 1, axis=0).max(axis=-1)
        per_time = win[start + 1: end + 1] @ weights
    else:
        per_time = gap[m + start + 1: m + end + 1] @ weights
    return float(per_time.max()) if per_time.size else 0.0


def _window_steps(t_final: float, lipschitz_L: float, dt: float, steps: int) -> int:
    span = min(t_final, WINDOW_FACTOR / lipschitz_L) if t_final > 0 else t_final
    return min(steps, max(1, int(round(span / dt)))) if steps else 0


def _picard(kernel, storage, weights, m, steps, dt, scheme, tol, max_iters,
            path_metric, guard: _Guard):
    trace: List[Tuple[int, float, float]] = []
    wlen = _window_steps(steps * dt, kernel.lipschitz_L, dt, steps)
    iteration = 0
    start = 0
    while start < steps:
        end = min(steps, start + wlen)
        converged = False
        for _ in range(max_iters):
            frozen = storage.copy()
            _integrate_window(kernel, storage, frozen, weights, m, dt, scheme, start, end)
            guard.check(storage[m + end], m + end, end * dt)
            residual = _residual_bound(frozen, storage, weights, m, start, end, path_metric)
            iteration += 1
            trace.append((iteration, start * dt, residual))
            if residual <= tol:
                converged = True
                break
        if not converged:
            raise NonConvergenceError(
                f"Picard iteration stalled at residual {trace[-1][2]:g} "
                f"(window starting at t = {start * dt:g}, tol {tol:g})", trace)
        start = end
    return trace


def gamma(mu: PathMeasureCurve, mu_in: DiscreteMeasure, kernel: DelayKernel,
          config: IntegratorConfig) -> PathMeasureCurve:
    """One application of the fixed-point operator.

    Extends every atom of mu_in under the flow of the field induced by the
    frozen curve mu, then reads the measure curve of trailing windows off the
    extended trajectories.  gamma(mu)(0) = mu_in by construction.
    """
    if not mu_in.is_path_measure:
        raise ShapeError("mu_in must be a measure on path space")
    tau = mu_in.atoms[0].tau
    dt = config.dt
    m = config.history_steps(tau)
    steps = len(mu.grid) - 1 - mu.history_nodes
    grid = mu.grid
    storage = np.empty((m + steps + 1, mu_in.num_atoms, mu_in.dim))
    storage[: m + 1] = _resample_histories(list(mu_in.atoms), grid[: m + 1])
    storage[m + 1:] = storage[m]
    _integrate_window(kernel, storage, mu.states, mu.weights, m, dt,
                      config.scheme, 0, steps)
    return PathMeasureCurve(grid, storage, mu_in.weights, tau, m)


def initial_freeze(mu_in: DiscreteMeasure, config: IntegratorConfig,
                   t_final: float | None = None) -> PathMeasureCurve:
    """The zero-field freeze of mu_in: every atom continues constantly at sigma(0)."""
    tau = mu_in.atoms[0].tau
    m = config.history_steps(tau)
    steps = IntegratorConfig(config.dt, config.scheme,
                             config.t_final if t_final is None else t_final).horizon_steps()
    grid = np.arange(-m, steps + 1, dtype=float) * config.dt
    storage = np.empty((m + steps + 1, mu_in.num_atoms, mu_in.dim))
    storage[: m + 1] = _resample_histories(list(mu_in.atoms), grid[: m + 1])
    storage[m + 1:] = storage[m]
    return PathMeasureCurve(grid, storage, mu_in.weights, tau, m)


def solve_fixed_point(mu_in: DiscreteMeasure, kernel: DelayKernel,
                      fpconfig: FixedPointConfig):
    """Solve the path-space fixed-point equation by windowed Picard iteration.

    Returns (curve, trace) where trace lists (iteration, window_start,
    residual) rows; the residual is the identity-coupling upper bound on the
    sup-in-time W1 gap between consecutive iterates over the current window.
    """
    if not mu_in.is_path_measure:
        raise ShapeError("mu_in must be a measure on path space")
    cfg = fpconfig.integrator
    curve = initial_freeze(mu_in, cfg)
    m = curve.history_nodes
    steps = len(curve.grid) - 1 - m
    storage = curve.states.copy()
    guard = _Guard(kernel, max(a.sup_norm() for a in mu_in.atoms))
    trace = _picard(kernel, storage, mu_in.weights, m, steps, cfg.dt, cfg.scheme,
                    fpconfig.tol, fpconfig.max_iters, path_metric=True, guard=guard)
    return PathMeasureCurve(curve.grid, storage, mu_in.weights, curve.tau, m), trace


def _initial_states_from_curve(mu_in_curve: MeasureCurve, grid_hist: np.ndarray):
    """Resample a measure curve on [-tau, 0] onto the integrator history grid.

    Requires a constant atom count and constant weights across times; atom
    positions are interpolated linearly in time between curve nodes.
    """
    counts = {mu.num_atoms for mu in mu_in_curve.measures}
    if len(counts) != 1:
        raise ShapeError("initial measure curve must keep a constant atom count")
    weights = mu_in_curve.measures[0].weights
    for mu in mu_in_curve.measures:
        if mu.is_path_measure:
            raise ShapeError("initial curve must hold measures on R^d")
        if np.max(np.abs(mu.weights - weights)) > 1e-12:
            raise ShapeError("initial measure curve must keep constant weights")
    positions = np.stack([mu.atoms for mu in mu_in_curve.measures])  # (nt, N, d)
    flat = positions.reshape(len(mu_in_curve.times), -1)
    interped = np.stack([np.interp(grid_hist, mu_in_curve.times, flat[:, j])
                         for j in range(flat.shape[1])], axis=1)
    out = interped.reshape((len(grid_hist),) + positions.shape[1:])
    return out, weights


def solve_transport(mu_in_curve: MeasureCurve, ktilde: PointKernel, rho: DelayMeasure,
                    fpconfig: FixedPointConfig):
    """Solve the imperfect-memory transport equation by Picard iteration.

    The atoms of mu_in_curve at time 0 are pushed forward by the flow of the
    delay-averaged field of the frozen iterate; the curve is kept equal to the
    initial data on [-tau, 0].  Returns (curve on [-tau, T], trace).
    """
    tau = mu_in_curve.tau
    cfg = fpconfig.integrator
    m = cfg.history_steps(tau)
    steps = cfg.horizon_steps()
    dt = cfg.dt
    kernel = compose_imperfect(ktilde, rho, tau)
    grid = np.arange(-m, steps + 1, dtype=float) * dt
    init_states, weights = _initial_states_from_curve(mu_in_curve, grid[: m + 1])
    storage = np.empty((m + steps + 1,) + init_states.shape[1:])
    storage[: m + 1] = init_states
    storage[m + 1:] = storage[m]
    r0 = float(np.linalg.norm(init_states, axis=-1).max())
    trace = _picard(kernel, storage, weights, m, steps, dt, cfg.scheme,
                    fpconfig.tol, fpconfig.max_iters, path_metric=False,
                    guard=_Guard(kernel, r0))
    measures = [DiscreteMeasure(row, weights) for row in storage]
    return MeasureCurve(grid, measures, tau), trace


@dataclass(frozen=True)
class CoherenceReport:
    """Per-time gap between the two mean-field routes, plus the compatibility check."""

    times: np.ndarray
    gap: np.ndarray
    compatibility_gap: float
    path_curve: PathMeasureCurve
    transport_curve: MeasureCurve
    trace_fixed_point: list = field(repr=False, default_factory=list)
    trace_transport: list = field(repr=False, default_factory=list)

    @property
    def max_gap(self) -> float:
        return float(self.gap.max())


def coherence_check(mu_in: DiscreteMeasure, ktilde: PointKernel, rho: DelayMeasure,
                    fpconfig: FixedPointConfig) -> CoherenceReport:
    """Compare the perfect-memory solution, pushed to positions, with the
    imperfect-memory transport solution started from the evaluated initial data."""
    tau = mu_in.atoms[0].tau
    cfg = fpconfig.integrator
    kernel = compose_imperfect(ktilde, rho, tau)
    path_curve, trace_a = solve_fixed_point(mu_in, kernel, fpconfig)

    m = path_curve.history_nodes
    hist_times = path_curve.grid[: m + 1]
    hist_measures = [DiscreteMeasure(path_curve.states[i], mu_in.weights)
                     for i in range(m + 1)]
    initial_curve = MeasureCurve(hist_times, hist_measures, tau)
    transport_curve, trace_b = solve_transport(initial_curve, ktilde, rho, fpconfig)

    times = path_curve.times
    gap = np.empty(len(times))
    for k, t in enumerate(times):
        gap[k] = wasserstein1(path_curve.position_measure_at(t),
                              transport_curve.measures[m + k])

    # ev(s) # mu(t) must equal the position curve at t + s at shared nodes
    comp = 0.0
    s_nodes = np.linspace(-tau, 0.0, min(m + 1, 5))
    for t in times[:: max(1, len(times) // 8)]:
        mu_t = path_curve.measure_at(t)
        for s in s_nodes:
            s_aligned = round(s / cfg.dt) * cfg.dt
            target = DiscreteMeasure(
                path_curve.states[path_curve._node(t + s_aligned)], mu_in.weights)
            comp = max(comp, wasserstein1(mu_t.ev_pushforward(s_aligned), target))

    return CoherenceReport(times, gap, comp, path_curve, transport_curve,
                           trace_a, trace_b)
