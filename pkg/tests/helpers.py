"""Shared test oracles, independent of the library's own solvers."""

import cvxpy as cp
import numpy as np


def lp_w1_oracle(cost: np.ndarray, wa: np.ndarray, wb: np.ndarray) -> float:
    """Exact transport LP value via an independent simplex solver (GLPK)."""
    n, m = cost.shape
    plan = cp.Variable((n, m), nonneg=True)
    problem = cp.Problem(
        cp.Minimize(cp.sum(cp.multiply(cost, plan))),
        [cp.sum(plan, axis=1) == wa, cp.sum(plan, axis=0) == wb],
    )
    return float(problem.solve(solver="GLPK"))


def lp_w1_points(xa, wa, xb, wb) -> float:
    xa = np.atleast_2d(np.asarray(xa, dtype=float).T).T
    xb = np.atleast_2d(np.asarray(xb, dtype=float).T).T
    cost = np.linalg.norm(xa[:, None, :] - xb[None, :, :], axis=-1)
    return lp_w1_oracle(cost, np.asarray(wa, float), np.asarray(wb, float))


def ode_reference(field, x0: np.ndarray, dt: float, steps: int,
                  scheme: str = "rk4") -> np.ndarray:
    """Plain (no-delay) explicit integrator for x' = field(x); returns all nodes."""
    out = np.empty((steps + 1,) + x0.shape)
    out[0] = x0
    x = x0
    for k in range(steps):
        if scheme == "euler":
            x = x + dt * field(x)
        else:
            k1 = field(x)
            k2 = field(x + 0.5 * dt * k1)
            k3 = field(x + 0.5 * dt * k2)
            k4 = field(x + dt * k3)
            x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = x
    return out


def random_measure(rng, n, d):
    from delaykinetic import DiscreteMeasure

    w = rng.uniform(0.1, 1.0, size=n)
    return DiscreteMeasure(rng.normal(scale=2.0, size=(n, d)), w / w.sum())


def random_path_measure(rng, n, d, tau=1.0, nodes=9):
    from delaykinetic import DiscreteMeasure, HistoryPath

    grid = np.linspace(-tau, 0.0, nodes)
    atoms = [HistoryPath(grid, rng.normal(scale=1.5, size=(nodes, d)))
             for _ in range(n)]
    w = rng.uniform(0.1, 1.0, size=n)
    return DiscreteMeasure(atoms, w / w.sum())
