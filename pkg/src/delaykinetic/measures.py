"""Discrete probability measures, push-forwards and exact Wasserstein-1 distances.

Measures live either on R^d (atoms stored as an (n, d) array) or on the path
space of history segments (atoms stored as a list of HistoryPath).  All
transport problems are solved exactly: a sorted/CDF closed form in one
dimension, the assignment specialization for equal-size uniform measures, and
the transport linear program (HiGHS) otherwise.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog
from scipy.sparse import coo_matrix
from scipy.spatial.distance import cdist

from .errors import DomainError, ShapeError
from .paths import HistoryPath, path_distance, path_from_csv, path_to_csv

_WEIGHT_TOL = 1e-12
_PRUNE_TOL = 1e-15


@dataclass(frozen=True)
class DiscreteMeasure:
    """A finitely supported probability measure: weighted atoms on a ground space.

    Atoms are either an (n, d) float array (measure on R^d) or a list of
    HistoryPath (measure on path space).  Weights are nonnegative and sum to
    one within 1e-12.
    """

    atoms: object
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        atoms = self.atoms
        if isinstance(atoms, (list, tuple)) and atoms and isinstance(atoms[0], HistoryPath):
            atoms = list(atoms)
            n = len(atoms)
        else:
            atoms = np.atleast_2d(np.asarray(atoms, dtype=float).T).T
            n = len(atoms)
        if n < 1:
            raise ShapeError("a measure needs at least one atom")
        if self.weights is None:
            weights = np.full(n, 1.0 / n)
        else:
            weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (n,):
            raise ShapeError("need one weight per atom")
        if np.any(weights < -_PRUNE_TOL):
            raise ShapeError("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > _WEIGHT_TOL:
            raise ShapeError(f"weights sum to {weights.sum()!r}, expected 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def is_path_measure(self) -> bool:
        return isinstance(self.atoms, list)

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    @property
    def dim(self) -> int:
        if self.is_path_measure:
            return self.atoms[0].dim
        return self.atoms.shape[1]

    def positions(self) -> np.ndarray:
        if self.is_path_measure:
            raise ShapeError("positions() is only defined for measures on R^d")
        return self.atoms

    def push_forward(self, f) -> "DiscreteMeasure":
        """f#mu: map every atom through f, keep the weights.

        Atoms whose weight fell below 1e-15 are pruned; nearby atoms are
        deliberately not merged.
        """
        keep = self.weights > _PRUNE_TOL
        if self.is_path_measure:
            atoms = [f(a) for a, k in zip(self.atoms, keep) if k]
        else:
            atoms = np.array([np.atleast_1d(f(a)) for a, k in zip(self.atoms, keep) if k])
        w = self.weights[keep]
        return DiscreteMeasure(atoms, w / w.sum())

    def ev_pushforward(self, s: float) -> "DiscreteMeasure":
        """Push a path measure forward by the evaluation map sigma -> sigma(s)."""
        if not self.is_path_measure:
            raise ShapeError("ev_pushforward needs a measure on path space")
        tau = self.atoms[0].tau
        if s < -tau - 1e-9 or s > 1e-9:
            raise DomainError(f"evaluation time {s} outside [-{tau}, 0]")
        return self.push_forward(lambda sigma: sigma.evaluate(s))

    def integrate(self, phi) -> float:
        """Sum of w_a * phi(atom_a)."""
        if self.is_path_measure:
            vals = np.array([phi(a) for a in self.atoms], dtype=float)
        else:
            vals = np.asarray(phi(self.atoms), dtype=float)
        return float(np.dot(self.weights, vals))


def _path_cost_matrix(mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    a, b = mu.atoms, nu.atoms
    grids = {tuple(np.round(p.grid, 12)) for p in a + b}
    if len(grids) == 1:
        # shared grid: vectorized sup distance
        A = np.stack([p.values for p in a])
        B = np.stack([p.values for p in b])
        diff = A[:, None] - B[None, :]
        return np.linalg.norm(diff, axis=-1).max(axis=-1)
    return np.array([[path_distance(p, q) for q in b] for p in a])


def _w1_sorted_1d(xa, wa, xb, wb) -> float:
    """Exact W1 on the line via the CDF difference integral."""
    order_a, order_b = np.argsort(xa, kind="stable"), np.argsort(xb, kind="stable")
    points = np.concatenate([xa, xb])
    support = np.unique(points)
    cdf_a = np.cumsum(wa[order_a])
    cdf_b = np.cumsum(wb[order_b])
    fa = cdf_a[np.clip(np.searchsorted(xa[order_a], support, side="right") - 1, 0, None)]
    fa[support < xa[order_a][0]] = 0.0
    fb = cdf_b[np.clip(np.searchsorted(xb[order_b], support, side="right") - 1, 0, None)]
    fb[support < xb[order_b][0]] = 0.0
    return float(np.sum(np.abs(fa[:-1] - fb[:-1]) * np.diff(support)))


def _transport_lp(cost: np.ndarray, wa: np.ndarray, wb: np.ndarray) -> float:
    """Exact optimal transport cost via the primal LP solved by HiGHS."""
    n, m = cost.shape
    rows_i = np.repeat(np.arange(n), m)
    cols_j = np.tile(np.arange(m), n)
    var = np.arange(n * m)
    a_eq = coo_matrix(
        (np.ones(2 * n * m), (np.concatenate([rows_i, n + cols_j]), np.concatenate([var, var]))),
        shape=(n + m, n * m),
    ).tocsr()
    b_eq = np.concatenate([wa, wb])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)


def _is_uniform(w: np.ndarray) -> bool:
    return bool(np.allclose(w, 1.0 / len(w), rtol=0, atol=_WEIGHT_TOL))


def wasserstein1(mu: DiscreteMeasure, nu: DiscreteMeasure, cost=None) -> float:
    """Exact Monge-Kantorovich distance with the ground metric as cost.

    `cost` may be a precomputed (n, m) cost matrix; otherwise the Euclidean
    distance (R^d atoms) or the sup-norm path distance (path atoms) is used.
    """
    if mu.is_path_measure != nu.is_path_measure:
        raise ShapeError("cannot compare a path measure with a point measure")
    if mu.dim != nu.dim:
        raise ShapeError(f"ground dimension mismatch: {mu.dim} vs {nu.dim}")
    if cost is None and not mu.is_path_measure and mu.dim == 1:
        return _w1_sorted_1d(mu.atoms[:, 0], mu.weights, nu.atoms[:, 0], nu.weights)
    if cost is None:
        if mu.is_path_measure:
            cost = _path_cost_matrix(mu, nu)
        else:
            cost = cdist(mu.atoms, nu.atoms)
    cost = np.asarray(cost, dtype=float)
    if cost.shape != (mu.num_atoms, nu.num_atoms):
        raise ShapeError("cost matrix shape does not match the atom counts")
    if mu.num_atoms == nu.num_atoms and _is_uniform(mu.weights) and _is_uniform(nu.weights):
        rows, cols = linear_sum_assignment(cost)
        return float(cost[rows, cols].mean())
    return _transport_lp(cost, mu.weights, nu.weights)


def wasserstein1_paths(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """W1 between path measures with the sup-norm ground metric."""
    if not (mu.is_path_measure and nu.is_path_measure):
        raise ShapeError("wasserstein1_paths needs two path measures")
    return wasserstein1(mu, nu)


@dataclass(frozen=True)
class MeasureCurve:
    """A time-indexed family t -> mu(t) of discrete measures on a shared grid."""

    times: np.ndarray
    measures: list
    tau: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if len(times) != len(self.measures):
            raise ShapeError("need one measure per time")
        if np.any(np.diff(times) <= 0):
            raise ShapeError("times must be strictly increasing")
        dims = {m.dim for m in self.measures}
        if len(dims) != 1:
            raise ShapeError("all measures must share the ground dimension")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "measures", list(self.measures))

    @property
    def dim(self) -> int:
        return self.measures[0].dim

    def at(self, t: float) -> DiscreteMeasure:
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-9 * (1.0 + abs(t)):
            raise DomainError(f"time {t} is not on the curve grid")
        return self.measures[idx]

    def window(self, t: float) -> "MeasureCurve":
        """The sub-curve on [t - tau, t], re-indexed to [-tau, 0]."""
        tol = 1e-9 * (1.0 + abs(t))
        mask = (self.times >= t - self.tau - tol) & (self.times <= t + tol)
        if not np.any(mask):
            raise DomainError(f"window at {t} does not intersect the curve")
        return MeasureCurve(self.times[mask] - t, [m for m, k in zip(self.measures, mask) if k],
                            self.tau)


def sup_wasserstein(a: MeasureCurve, b: MeasureCurve, window=None) -> float:
    """Max over shared grid times of the per-time W1 distance."""
    if len(a.times) != len(b.times) or np.max(np.abs(a.times - b.times)) > 1e-9:
        raise ShapeError("curves must share the time grid")
    lo, hi = (-np.inf, np.inf) if window is None else window
    best = 0.0
    for t, ma, mb in zip(a.times, a.measures, b.measures):
        if lo - 1e-12 <= t <= hi + 1e-12:
            best = max(best, wasserstein1(ma, mb))
    return best


def measure_to_csv(mu: DiscreteMeasure, file) -> None:
    """Write an R^d measure as rows `weight, x_1..x_d`."""
    if mu.is_path_measure:
        raise ShapeError("use path_measure_to_dir for path measures")
    with open(file, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["weight"] + [f"x_{k + 1}" for k in range(mu.dim)])
        for w, x in zip(mu.weights, mu.atoms):
            writer.writerow([f"{w:.17g}"] + [f"{v:.17g}" for v in x])


def measure_from_csv(file) -> DiscreteMeasure:
    with open(file, newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)
    return DiscreteMeasure(data[:, 1:], data[:, 0])


def path_measure_to_dir(mu: DiscreteMeasure, directory) -> None:
    """Write a path measure as one CSV per atom plus a weight manifest."""
    if not mu.is_path_measure:
        raise ShapeError("path_measure_to_dir needs a path measure")
    os.makedirs(directory, exist_ok=True)
    names = []
    for k, atom in enumerate(mu.atoms):
        name = f"atom_{k:04d}.csv"
        path_to_csv(atom, os.path.join(directory, name))
        names.append(name)
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump({"atoms": names, "weights": [float(w) for w in mu.weights]}, fh, indent=2)
        fh.write("\n")


def path_measure_from_dir(directory) -> DiscreteMeasure:
    with open(os.path.join(directory, "manifest.json")) as fh:
        manifest = json.load(fh)
    atoms = [path_from_csv(os.path.join(directory, name)) for name in manifest["atoms"]]
    return DiscreteMeasure(atoms, np.asarray(manifest["weights"], dtype=float))
