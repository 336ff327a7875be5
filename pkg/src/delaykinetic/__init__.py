"""Delayed interacting-particle systems and their mean-field limits.

The package simulates finite populations whose velocities depend on the
other agents' recent history, solves the limiting measure-valued fixed-point
equation by windowed Picard iteration, and evaluates the quantitative
stability envelopes that connect the two descriptions.
"""

__version__ = "0.1.0"

from .analysis import (BoundParams, continuous_dependence_rate, convergence_study,
                       empirical_position_measure, flow_bounds, groenwall_envelope,
                       lipschitz_bound, sample_initial_paths, sensitivity_bound,
                       stability_study, support_bound)
from .dde import FlowMap, IntegratorConfig, simulate_imperfect, simulate_particles
from .errors import (ConfigError, DiscontinuityError, DivergenceError, DomainError,
                     NonConvergenceError, ShapeError)
from .kernels import (BUILTIN_MODELS, DelayKernel, DelayMeasure, PointKernel,
                      bounded_confidence, compose_imperfect, kuramoto,
                      linear_attraction, pheromone, pure_delay_linear)
from .meanfield import (CoherenceReport, FixedPointConfig, PathMeasureCurve,
                        coherence_check, gamma, initial_freeze, solve_fixed_point,
                        solve_transport)
from .measures import (DiscreteMeasure, MeasureCurve, measure_from_csv, measure_to_csv,
                       path_measure_from_dir, path_measure_to_dir, sup_wasserstein,
                       wasserstein1, wasserstein1_paths)
from .paths import (HistoryPath, Trajectory, path_distance, path_from_csv, path_to_csv,
                    splice, trajectory_from_csv)

__all__ = [
    "BoundParams",
    "BUILTIN_MODELS",
    "CoherenceReport",
    "ConfigError",
    "DelayKernel",
    "DelayMeasure",
    "DiscontinuityError",
    "DiscreteMeasure",
    "DivergenceError",
    "DomainError",
    "FixedPointConfig",
    "FlowMap",
    "HistoryPath",
    "IntegratorConfig",
    "MeasureCurve",
    "NonConvergenceError",
    "PathMeasureCurve",
    "PointKernel",
    "ShapeError",
    "Trajectory",
    "bounded_confidence",
    "coherence_check",
    "compose_imperfect",
    "continuous_dependence_rate",
    "convergence_study",
    "empirical_position_measure",
    "flow_bounds",
    "gamma",
    "groenwall_envelope",
    "initial_freeze",
    "kuramoto",
    "linear_attraction",
    "lipschitz_bound",
    "measure_from_csv",
    "measure_to_csv",
    "path_distance",
    "path_from_csv",
    "path_measure_from_dir",
    "path_measure_to_dir",
    "path_to_csv",
    "pheromone",
    "pure_delay_linear",
    "sample_initial_paths",
    "sensitivity_bound",
    "simulate_imperfect",
    "simulate_particles",
    "solve_fixed_point",
    "solve_transport",
    "splice",
    "stability_study",
    "sup_wasserstein",
    "support_bound",
    "trajectory_from_csv",
    "wasserstein1",
    "wasserstein1_paths",
]
