"""Sampled continuous paths on [-tau, 0] and [-tau, T].

A history segment is stored as values on a strictly increasing time grid and
evaluated by piecewise-linear interpolation between nodes.  The restriction
(windowing), splicing and sup-norm operations all work on these sampled
representations; binary operations resample both operands onto the union of
their grids first.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DiscontinuityError, DomainError, ShapeError

_GRID_TOL = 1e-9


def _linear_interp(grid: np.ndarray, values: np.ndarray, s) -> np.ndarray:
    """Piecewise-linear interpolation of (grid, values) at times s."""
    s = np.asarray(s, dtype=float)
    idx = np.clip(np.searchsorted(grid, s, side="right") - 1, 0, len(grid) - 2)
    left = grid[idx]
    step = grid[idx + 1] - left
    theta = np.clip((s - left) / step, 0.0, 1.0)
    if values.ndim == 2:
        theta = theta[..., None]
    return (1.0 - theta) * values[idx] + theta * values[idx + 1]


def _check_grid(grid: np.ndarray, left: float, right: float) -> None:
    if grid.ndim != 1 or len(grid) < 2:
        raise ShapeError("grid must be a 1-D array with at least two nodes")
    if np.any(np.diff(grid) <= 0):
        raise ShapeError("grid must be strictly increasing")
    scale = max(1.0, abs(left), abs(right))
    if abs(grid[0] - left) > _GRID_TOL * scale or abs(grid[-1] - right) > _GRID_TOL * scale:
        raise ShapeError(
            f"grid must span [{left!r}, {right!r}], got [{grid[0]!r}, {grid[-1]!r}]"
        )


@dataclass(frozen=True)
class HistoryPath:
    """One sampled continuous function sigma: [-tau, 0] -> R^d.

    grid[0] = -tau and grid[-1] = 0; values holds one R^d point per node.
    Instances are immutable and all operations are pure.
    """

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.atleast_2d(np.asarray(self.values, dtype=float).T).T
        if values.ndim != 2 or len(values) != len(grid):
            raise ShapeError("values must provide one point per grid node")
        if grid[0] >= 0:
            raise ShapeError("history grid must start at -tau < 0")
        _check_grid(grid, grid[0], 0.0)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def tau(self) -> float:
        return -float(self.grid[0])

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_function(cls, fn, tau: float, num: int = 257) -> "HistoryPath":
        """Sample fn on a uniform grid of `num` nodes over [-tau, 0]."""
        grid = np.linspace(-tau, 0.0, num)
        vals = np.array([np.atleast_1d(fn(s)) for s in grid], dtype=float)
        return cls(grid, vals)

    @classmethod
    def constant(cls, point, tau: float) -> "HistoryPath":
        point = np.atleast_1d(np.asarray(point, dtype=float))
        return cls(np.array([-tau, 0.0]), np.stack([point, point]))

    def _check_time(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        tol = _GRID_TOL * (1.0 + self.tau)
        if np.any(s < -self.tau - tol) or np.any(s > tol):
            raise DomainError(f"time {s!r} outside [-{self.tau}, 0]")
        return np.clip(s, -self.tau, 0.0)

    def evaluate(self, s):
        """Interpolated value sigma(s); exact at grid nodes."""
        s = self._check_time(s)
        return _linear_interp(self.grid, self.values, s)

    def __call__(self, s):
        return self.evaluate(s)

    def sup_norm(self) -> float:
        """Max over grid nodes of the Euclidean norm of the values."""
        return float(np.linalg.norm(self.values, axis=1).max())

    def resample(self, grid: np.ndarray) -> "HistoryPath":
        return HistoryPath(grid, _linear_interp(self.grid, self.values, grid))

    def translate(self, offset) -> "HistoryPath":
        offset = np.atleast_1d(np.asarray(offset, dtype=float))
        return HistoryPath(self.grid, self.values + offset)


def _union_grid(a: HistoryPath, b: HistoryPath) -> np.ndarray:
    grid = np.union1d(a.grid, b.grid)
    # merge nodes that differ only by round-off
    keep = np.concatenate([[True], np.diff(grid) > _GRID_TOL * (1.0 + a.tau)])
    return grid[keep]


def path_distance(a: HistoryPath, b: HistoryPath) -> float:
    """Sup-norm distance max_s |a(s) - b(s)| on the union grid."""
    if a.dim != b.dim:
        raise ShapeError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if abs(a.tau - b.tau) > _GRID_TOL * (1.0 + a.tau):
        raise ShapeError(f"delay mismatch: {a.tau} vs {b.tau}")
    grid = _union_grid(a, b)
    diff = a.resample(grid).values - b.resample(grid).values
    return float(np.linalg.norm(diff, axis=1).max())


def splice(prefix: HistoryPath, suffix: HistoryPath, h: float,
           tol: float | None = None) -> HistoryPath:
    """Follow `prefix` on [-tau, h] and `suffix` on [h, 0].

    The two paths must agree at the splice time h (continuity); the default
    tolerance scales with the operands' sup norms.
    """
    if abs(prefix.tau - suffix.tau) > _GRID_TOL or prefix.dim != suffix.dim:
        raise ShapeError("splice operands must share tau and dim")
    h = float(np.clip(h, -prefix.tau, 0.0))
    if tol is None:
        tol = 1e-9 * (1.0 + max(prefix.sup_norm(), suffix.sup_norm()))
    gap = np.linalg.norm(prefix.evaluate(h) - suffix.evaluate(h))
    if gap > tol:
        raise DiscontinuityError(f"paths differ by {gap:g} at splice time {h:g}")
    grid = _union_grid(prefix, suffix)
    if np.min(np.abs(grid - h)) > _GRID_TOL:
        grid = np.sort(np.append(grid, h))
    vals_pre = prefix.resample(grid).values
    vals_suf = suffix.resample(grid).values
    mask = (grid <= h)[:, None]
    return HistoryPath(grid, np.where(mask, vals_pre, vals_suf))


@dataclass(frozen=True)
class Trajectory:
    """A sampled solution path on [-tau, T] with windowing back into history space."""

    grid: np.ndarray
    values: np.ndarray
    tau: float

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.atleast_2d(np.asarray(self.values, dtype=float).T).T
        if values.ndim != 2 or len(values) != len(grid):
            raise ShapeError("values must provide one point per grid node")
        tau = float(self.tau)
        if tau <= 0:
            raise ShapeError("tau must be positive")
        _check_grid(grid, -tau, grid[-1])
        if grid[-1] < -_GRID_TOL:
            raise ShapeError("trajectory must reach at least t = 0")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "tau", tau)

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        tol = _GRID_TOL * (1.0 + self.tau + abs(self.horizon))
        if np.any(t < -self.tau - tol) or np.any(t > self.horizon + tol):
            raise DomainError(f"time {t!r} outside [-{self.tau}, {self.horizon}]")
        return _linear_interp(self.grid, self.values, np.clip(t, -self.tau, self.horizon))

    def __call__(self, t):
        return self.evaluate(t)

    def window(self, t: float) -> HistoryPath:
        """Restriction operator: the history segment seen at time t."""
        tol = _GRID_TOL * (1.0 + abs(self.horizon))
        if t < -tol or t > self.horizon + tol:
            raise DomainError(f"window time {t} outside [0, {self.horizon}]")
        t = float(np.clip(t, 0.0, self.horizon))
        inner = self.grid[(self.grid > t - self.tau + _GRID_TOL)
                          & (self.grid < t - _GRID_TOL)]
        grid = np.concatenate([[t - self.tau], inner, [t]])
        return HistoryPath(grid - t, self.evaluate(grid))

    def sup_norm(self) -> float:
        return float(np.linalg.norm(self.values, axis=1).max())


def path_to_csv(path, file) -> None:
    """Write a HistoryPath or Trajectory as rows `t, x_1..x_d`."""
    with open(file, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + [f"x_{k + 1}" for k in range(path.values.shape[1])])
        for t, row in zip(path.grid, path.values):
            writer.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])


def path_from_csv(file) -> HistoryPath:
    grid, values = _read_path_csv(file)
    return HistoryPath(grid, values)


def trajectory_from_csv(file, tau: float) -> Trajectory:
    grid, values = _read_path_csv(file)
    return Trajectory(grid, values, tau)


def _read_path_csv(file):
    with open(file, newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)
    grid, values = data[:, 0], data[:, 1:]
    if np.any(np.diff(grid) <= 0):
        raise ShapeError(f"{file}: time column must be strictly increasing")
    return grid, values
