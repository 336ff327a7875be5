"""Interaction laws between agents.

A delay kernel maps (current position, other agent's history segment) to a
velocity contribution and carries a certified global Lipschitz constant.  The
imperfect-memory kernels are built by averaging a plain point kernel over a
purely atomic delay measure on [-tau, 0]; that composite structure is kept on
the kernel object so integrators can use a vectorized evaluation path.

Point kernels evaluate with numpy broadcasting: arguments of shape (..., d)
produce values of shape (..., d).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, ShapeError
from .paths import HistoryPath

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class DelayMeasure:
    """A purely atomic probability measure on [-tau, 0] weighting past times."""

    times: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        times = np.atleast_1d(np.asarray(self.times, dtype=float))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if times.shape != weights.shape or times.ndim != 1:
            raise ShapeError("need one weight per delay atom")
        if np.any(times > 1e-12):
            raise ShapeError("delay atoms must lie in [-tau, 0]")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > _WEIGHT_TOL:
            raise ShapeError("delay weights must be nonnegative and sum to 1")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def delta_zero(cls) -> "DelayMeasure":
        return cls(np.array([0.0]), np.array([1.0]))

    @classmethod
    def delta(cls, s: float) -> "DelayMeasure":
        return cls(np.array([float(s)]), np.array([1.0]))

    @classmethod
    def exponential(cls, tau: float, decay: float, num: int = 5) -> "DelayMeasure":
        """Atoms on a uniform grid of [-tau, 0] with weights ~ exp(decay * s).

        For decay > 0 the weight vanishes toward s = -tau, mimicking a trail
        whose intensity fades over the characteristic time tau.
        """
        if tau <= 0 or decay <= 0 or num < 1:
            raise ConfigError("tau, decay and atom count must be positive")
        times = np.linspace(-tau, 0.0, num)
        weights = np.exp(decay * times)
        return cls(times, weights / weights.sum())

    def check_span(self, tau: float) -> None:
        if np.any(self.times < -tau - 1e-9 * (1.0 + tau)):
            raise ShapeError(f"delay atoms extend beyond -tau = {-tau}")


@dataclass(frozen=True)
class PointKernel:
    """An instantaneous interaction law K~(x, y) with Lipschitz certificate.

    The declared constant L must satisfy
    |K~(x, y) - K~(x', y')| <= L (|x - x'| + |y - y'|) globally; this is
    validated by sampled property tests, not estimated at runtime.
    """

    name: str
    func: Callable
    lipschitz_L: float
    dim: int = 1

    def __post_init__(self):
        if self.lipschitz_L <= 0:
            raise ConfigError("lipschitz_L must be positive")

    def evaluate(self, x, y):
        return self.func(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def __call__(self, x, y):
        return self.evaluate(x, y)


@dataclass(frozen=True)
class DelayKernel:
    """The general interaction law K(x, sigma) acting on history segments."""

    name: str
    func: Callable
    lipschitz_L: float
    dim: int
    tau: float
    point_kernel: Optional[PointKernel] = None
    delay_measure: Optional[DelayMeasure] = None

    def __post_init__(self):
        if self.lipschitz_L <= 0 or self.tau <= 0:
            raise ConfigError("lipschitz_L and tau must be positive")

    @property
    def is_composite(self) -> bool:
        return self.point_kernel is not None and self.delay_measure is not None

    def evaluate(self, x, sigma: HistoryPath):
        """K(x, sigma); x may carry leading batch axes over positions."""
        return self.func(np.asarray(x, dtype=float), sigma)

    def __call__(self, x, sigma):
        return self.evaluate(x, sigma)

    def growth_constant(self) -> float:
        """C with |K(x, sigma)| <= C (1 + |x| + ||sigma||): max(L, |K(0, 0)|)."""
        zero = HistoryPath.constant(np.zeros(self.dim), self.tau)
        k0 = float(np.linalg.norm(self.evaluate(np.zeros(self.dim), zero)))
        return max(self.lipschitz_L, k0)


def compose_imperfect(ktilde: PointKernel, rho: DelayMeasure, tau: float) -> DelayKernel:
    """K(x, sigma) = sum_k w_k K~(x, sigma(s_k)) over the atoms of rho.

    The composition keeps K~'s Lipschitz constant: rho has unit mass, so the
    weighted sum of L-Lipschitz maps is L-Lipschitz and |sigma(s) - sigma'(s)|
    is dominated by the sup norm.
    """
    rho.check_span(tau)

    def func(x, sigma: HistoryPath):
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.broadcast_shapes(x.shape, (ktilde.dim,)), dtype=float)
        for s, w in zip(rho.times, rho.weights):
            out = out + w * ktilde.func(x, sigma.evaluate(max(s, -sigma.tau)))
        return out

    return DelayKernel(
        name=f"{ktilde.name}*rho",
        func=func,
        lipschitz_L=ktilde.lipschitz_L,
        dim=ktilde.dim,
        tau=tau,
        point_kernel=ktilde,
        delay_measure=rho,
    )


# --- builtin model library ---------------------------------------------------


def linear_attraction(dim: int = 1) -> PointKernel:
    """K~(x, y) = y - x: pairwise linear consensus (L = 1)."""
    if dim < 1:
        raise ConfigError("dim must be a positive integer")
    return PointKernel("linear_attraction", lambda x, y: y - x, 1.0, dim)


def _smoothstep_cutoff(r, radius):
    u = np.clip((r - radius / 2.0) / (radius / 2.0), 0.0, 1.0)
    return 1.0 - u * u * (3.0 - 2.0 * u)


def bounded_confidence(radius: float, dim: int = 1) -> PointKernel:
    """Attraction with a C^1 cutoff: K~(x, y) = phi(|y - x|) (y - x).

    phi is 1 on [0, R/2], descends along a cubic ramp and vanishes at R.  A
    hard indicator cutoff would break the global Lipschitz assumption; the
    smooth hat keeps it with L = 2 (sup of |phi(r) + phi'(r) r| over the ramp
    is below 1.98).
    """
    if radius <= 0:
        raise ConfigError("radius must be positive")

    def func(x, y):
        z = y - x
        r = np.linalg.norm(np.atleast_1d(z), axis=-1, keepdims=True)
        return _smoothstep_cutoff(r, radius) * z

    return PointKernel("bounded_confidence", func, 2.0, dim)


def kuramoto(kappa: float = 1.0) -> PointKernel:
    """Delayed Kuramoto coupling on the line: K~(x, y) = kappa sin(y - x)."""
    if kappa <= 0:
        raise ConfigError("kappa must be positive")
    return PointKernel("kuramoto", lambda x, y: kappa * np.sin(y - x), float(kappa), 1)


def pure_delay_linear(tau: float, dim: int = 1) -> DelayKernel:
    """K(x, sigma) = -sigma(-tau): the scalar test equation x'(t) = -x(t - tau)."""
    if tau <= 0:
        raise ConfigError("tau must be positive")
    ktilde = PointKernel("negate_delayed", lambda x, y: -y + 0.0 * x, 1.0, dim)
    return compose_imperfect(ktilde, DelayMeasure.delta(-tau), tau)


def pheromone(tau: float, radius: float = 1.0, decay: float = 2.0,
              num_atoms: int = 5, dim: int = 2) -> DelayKernel:
    """Trail-following model: bounded-confidence attraction toward past positions,
    weighted by an exponentially fading delay measure (fresh marks count most)."""
    rho = DelayMeasure.exponential(tau, decay, num_atoms)
    return compose_imperfect(bounded_confidence(radius, dim), rho, tau)


#: name -> (constructor, parameter documentation) for the CLI catalog
BUILTIN_MODELS = {
    "bounded_confidence": (bounded_confidence,
                           "radius (> 0, interaction range), dim"),
    "kuramoto": (kuramoto, "kappa (> 0, coupling strength)"),
    "linear_attraction": (linear_attraction, "dim"),
    "pheromone": (pheromone,
                  "tau, radius (> 0), decay (> 0, trail fade rate toward s = -tau), "
                  "num_atoms, dim"),
    "pure_delay_linear": (pure_delay_linear, "tau, dim"),
}
