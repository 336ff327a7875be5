"""Time integration by the method of steps, plus the frozen-measure flow map.

The N-particle delayed system is advanced with explicit schemes (euler, rk4)
on a uniform grid whose step divides the delay, so delayed reads at whole
steps hit grid nodes exactly.  Reads at intermediate stage times use a
four-point Lagrange interpolation of the stored trajectory; with a cubic read
the rk4 scheme keeps its full order on grid-aligned delays, which a
piecewise-linear read would not.

State storage is time-major: an array of shape (num_nodes, N, d) whose first
m + 1 rows hold the initial histories.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import ConfigError, DivergenceError, DomainError, ShapeError
from .kernels import DelayKernel
from .paths import HistoryPath, Trajectory

_ALIGN_TOL = 1e-9


def _aligned_steps(span: float, dt: float, what: str) -> int:
    n = int(round(span / dt))
    if n < 1 or abs(span - n * dt) > _ALIGN_TOL * max(1.0, abs(span)):
        raise ConfigError(f"{what} = {span} must be a positive integer multiple of dt = {dt}")
    return n


@dataclass(frozen=True)
class IntegratorConfig:
    """Step size, scheme and horizon for the method-of-steps integrator."""

    dt: float
    scheme: str = "rk4"
    t_final: float = 1.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.scheme not in ("euler", "rk4"):
            raise ConfigError(f"unknown scheme {self.scheme!r}; use 'euler' or 'rk4'")
        if self.t_final < 0:
            raise ConfigError("t_final must be nonnegative")

    def history_steps(self, tau: float) -> int:
        return _aligned_steps(tau, self.dt, "tau")

    def horizon_steps(self) -> int:
        if self.t_final == 0:
            return 0
        return _aligned_steps(self.t_final, self.dt, "t_final")


def _read_storage(storage: np.ndarray, n_known: int, pos) -> np.ndarray:
    """Cubic Lagrange read of time-major storage at fractional node index `pos`.

    Positions within 1e-9 of a node return the stored row exactly.  Queries
    slightly beyond the last known node fall back to a one-sided stencil
    (extrapolation), which only happens for delay atoms inside the current
    step.
    """
    if not isinstance(pos, np.ndarray):
        p = float(pos)
        nearest = round(p)
        if abs(p - nearest) < _ALIGN_TOL:
            if 0 <= nearest <= n_known:
                return storage[nearest]
            p = float(nearest)
        if p < 0:
            raise DomainError("history read before the start of the stored grid")
        j0 = min(max(int(p) - 1, 0), max(n_known - 3, 0))
        u = p - j0
        return ((u - 1) * (u - 2) * (u - 3) / -6.0 * storage[j0]
                + u * (u - 2) * (u - 3) / 2.0 * storage[j0 + 1]
                + u * (u - 1) * (u - 3) / -2.0 * storage[j0 + 2]
                + u * (u - 1) * (u - 2) / 6.0 * storage[j0 + 3])

    pos = np.asarray(pos, dtype=float)
    scalar = pos.ndim == 0
    pos = np.atleast_1d(pos)
    nearest = np.round(pos)
    snap = np.abs(pos - nearest) < _ALIGN_TOL
    pos = np.where(snap, nearest, pos)
    out = np.empty(pos.shape + storage.shape[1:], dtype=float)

    on_node = snap & (nearest >= 0) & (nearest <= n_known)
    if np.any(on_node):
        out[on_node] = storage[nearest[on_node].astype(int)]
    off = ~on_node
    if np.any(off):
        p = pos[off]
        if np.any(p < 0):
            raise DomainError("history read before the start of the stored grid")
        j0 = np.clip(np.floor(p).astype(int) - 1, 0, max(n_known - 3, 0))
        u = (p - j0)[:, None, None]
        s0 = storage[j0]
        s1 = storage[j0 + 1]
        s2 = storage[j0 + 2]
        s3 = storage[j0 + 3]
        l0 = (u - 1) * (u - 2) * (u - 3) / -6.0
        l1 = u * (u - 2) * (u - 3) / 2.0
        l2 = u * (u - 1) * (u - 3) / -2.0
        l3 = u * (u - 1) * (u - 2) / 6.0
        out[off] = l0 * s0 + l1 * s1 + l2 * s2 + l3 * s3
    return out[0] if scalar else out


def _stage_offsets(scheme: str):
    if scheme == "euler":
        return (0.0,)
    return (0.0, 0.5, 0.5, 1.0)


def _advance(f, pos: float, x: np.ndarray, dt: float, scheme: str) -> np.ndarray:
    """One explicit step of x' = f(pos, x), with pos measured in step units."""
    if scheme == "euler":
        return x + dt * f(pos, x)
    k1 = f(pos, x)
    k2 = f(pos + 0.5, x + (0.5 * dt) * k1)
    k3 = f(pos + 0.5, x + (0.5 * dt) * k2)
    k4 = f(pos + 1.0, x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _resample_histories(initial: List[HistoryPath], grid_hist: np.ndarray) -> np.ndarray:
    tau, dim = initial[0].tau, initial[0].dim
    for p in initial:
        if abs(p.tau - tau) > _ALIGN_TOL * (1.0 + tau) or p.dim != dim:
            raise ShapeError("all initial paths must share tau and dim")
    return np.stack([p.resample(grid_hist).values for p in initial], axis=1)


class _Guard:
    """Divergence guard: abort when any state exceeds 10x the a-priori bound."""

    def __init__(self, kernel: DelayKernel, r0: float):
        self.c = kernel.growth_constant()
        self.r0 = r0

    def check(self, x: np.ndarray, step: int, t: float) -> None:
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"non-finite state at step {step} (t = {t:g})",
                                  step=step, time=t)
        with np.errstate(over="ignore"):
            bound = self.r0 * np.exp(self.c * t) + np.expm1(self.c * t) * (1.0 + 2.0 * self.r0)
        worst = float(np.linalg.norm(x, axis=-1).max())
        if worst > 10.0 * bound:
            raise DivergenceError(
                f"state norm {worst:g} exceeds 10x the a-priori bound {bound:g} "
                f"at step {step} (t = {t:g})", step=step, time=t)


def _composite_rhs(kernel: DelayKernel, storage: np.ndarray, m: int, dt: float,
                   weights: np.ndarray | None = None, self_coupled: bool = True):
    """Vectorized right-hand side for kernels averaged over a delay measure.

    Reads delayed positions of all agents from `storage`.  In the self-coupled
    particle system the s = 0 atom uses the current stage states; when the
    field is frozen (flow map, Picard iteration) every read goes to storage.
    `weights` gives the agent weights (the uniform 1/N average when None).
    """
    ktilde = kernel.point_kernel
    offsets = kernel.delay_measure.times / dt
    rho_w = kernel.delay_measure.weights

    def rhs(pos, x, n_known):
        out = np.zeros_like(x)
        for off, w in zip(offsets, rho_w):
            if self_coupled and abs(off) < _ALIGN_TOL:
                y = x
            else:
                y = _read_storage(storage, n_known, m + pos + off)
            pair = ktilde.func(x[:, None, :], y[None, :, :])
            if weights is None:
                out += w * pair.mean(axis=1)
            else:
                out += w * np.einsum("b,abd->ad", weights, pair)
        return out

    return rhs


def _generic_rhs(kernel: DelayKernel, storage: np.ndarray, m: int, dt: float,
                 weights: np.ndarray | None = None, self_coupled: bool = True):
    """Right-hand side building full window paths for an arbitrary delay kernel."""
    tau = kernel.tau
    win_grid = np.linspace(-tau, 0.0, m + 1)
    win_offsets = np.arange(-m, 1, dtype=float)

    def rhs(pos, x, n_known):
        win = _read_storage(storage, n_known, m + pos + win_offsets)
        n_agents = storage.shape[1]
        if self_coupled:
            win[-1] = x
        out = np.zeros_like(x)
        w_uniform = 1.0 / n_agents
        for j in range(n_agents):
            sigma = HistoryPath(win_grid, win[:, j, :])
            w = w_uniform if weights is None else weights[j]
            out += w * kernel.evaluate(x, sigma)
        return out

    return rhs


def simulate_particles(kernel: DelayKernel, initial: List[HistoryPath],
                       config: IntegratorConfig) -> List[Trajectory]:
    """Integrate the coupled N-particle delayed system.

    Each particle follows x_i' = (1/N) sum_j K(x_i, window_j(t)) with the
    prescribed histories on [-tau, 0].  Returns one Trajectory per particle on
    the shared grid [-tau, T].
    """
    if not initial:
        raise ShapeError("need at least one initial history")
    tau, dim = initial[0].tau, initial[0].dim
    if abs(kernel.tau - tau) > _ALIGN_TOL * (1.0 + tau):
        raise ShapeError(f"kernel tau {kernel.tau} does not match initial histories {tau}")
    dt = config.dt
    m = config.history_steps(tau)
    steps = config.horizon_steps()
    n = len(initial)

    grid = np.arange(-m, steps + 1, dtype=float) * dt
    storage = np.empty((m + steps + 1, n, dim), dtype=float)
    storage[: m + 1] = _resample_histories(initial, grid[: m + 1])

    guard = _Guard(kernel, max(p.sup_norm() for p in initial))
    if kernel.is_composite:
        rhs = _composite_rhs(kernel, storage, m, dt)
    else:
        rhs = _generic_rhs(kernel, storage, m, dt)

    for step in range(steps):
        n_known = m + step

        def f(pos, x, _nk=n_known):
            return rhs(pos, x, _nk)

        x_new = _advance(f, float(step), storage[n_known], dt, config.scheme)
        guard.check(x_new, step + 1, (step + 1) * dt)
        storage[n_known + 1] = x_new

    return [Trajectory(grid, storage[:, i, :], tau) for i in range(n)]


def simulate_imperfect(ktilde, rho, initial: List[HistoryPath],
                       config: IntegratorConfig) -> List[Trajectory]:
    """Integrate the loss-of-memory system: delegates to the composed kernel.

    By construction this produces bit-identical trajectories to
    simulate_particles(compose_imperfect(ktilde, rho), ...): both discretize
    the same right-hand side in the same order.
    """
    from .kernels import compose_imperfect

    tau = initial[0].tau
    return simulate_particles(compose_imperfect(ktilde, rho, tau), initial, config)


@dataclass(frozen=True)
class FlowMap:
    """Solution operator of the frozen-measure equation x' = F[mu](t, x).

    The measure curve is carried as the time-major states of its path atoms
    (fully known on [-tau, T]) together with atom weights; the field is
    F[mu](t, x) = sum_a w_a K(x, window_a(t)).
    """

    kernel: DelayKernel
    atom_states: np.ndarray  # (num_nodes, num_atoms, d) on the curve grid
    weights: np.ndarray
    config: IntegratorConfig
    tau: float = field(default=None)

    def __post_init__(self):
        tau = self.kernel.tau if self.tau is None else float(self.tau)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "atom_states", np.asarray(self.atom_states, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))

    def _rhs(self):
        m = self.config.history_steps(self.tau)
        if self.kernel.is_composite:
            return _composite_rhs(self.kernel, self.atom_states, m, self.config.dt,
                                  weights=self.weights, self_coupled=False)
        return _generic_rhs(self.kernel, self.atom_states, m, self.config.dt,
                            weights=self.weights, self_coupled=False)

    def flow(self, s: float, t: float, x) -> np.ndarray:
        """T(s, t, x; mu): integrate from time s to time t starting at x."""
        dt = self.config.dt
        m = self.config.history_steps(self.tau)
        n_total = self.atom_states.shape[0]
        pos_s = _aligned_steps(s, dt, "s") if s > 0 else 0 if abs(s) < _ALIGN_TOL else None
        pos_t = _aligned_steps(t, dt, "t") if t > 0 else 0 if abs(t) < _ALIGN_TOL else None
        if pos_s is None or pos_t is None or pos_s > pos_t:
            raise DomainError("flow needs grid-aligned times with 0 <= s <= t")
        if m + pos_t > n_total - 1:
            raise DomainError("flow time exceeds the measure curve span")
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        rhs = self._rhs()
        n_known = n_total - 1  # frozen curve: every node is known
        for step in range(pos_s, pos_t):
            def f(pos, y, _nk=n_known):
                return rhs(pos, y, _nk)

            x = _advance(f, float(step), x, dt, self.config.scheme)
        return x[0] if single else x

    def extend(self, initial: HistoryPath, t_final: float) -> Trajectory:
        """ext[mu]: keep the history on [-tau, 0], then follow the frozen flow."""
        dt = self.config.dt
        m = self.config.history_steps(self.tau)
        steps = _aligned_steps(t_final, dt, "t_final") if t_final > 0 else 0
        if m + steps > self.atom_states.shape[0] - 1:
            raise DomainError("extension horizon exceeds the measure curve span")
        grid = np.arange(-m, steps + 1, dtype=float) * dt
        values = np.empty((m + steps + 1, initial.dim))
        values[: m + 1] = initial.resample(grid[: m + 1]).values
        rhs = self._rhs()
        n_known = self.atom_states.shape[0] - 1
        x = values[m][None, :]
        for step in range(steps):
            def f(pos, y, _nk=n_known):
                return rhs(pos, y, _nk)

            x = _advance(f, float(step), x, dt, self.config.scheme)
            values[m + step + 1] = x[0]
        return Trajectory(grid, values, self.tau)
