"""Neural 2-opt improvement for Euclidean TSP: core kernels, oracle, baselines and policy."""

from ._core import (
    CheckpointError,
    ConfigError,
    Error,
    Instance,
    InvalidInput,
    InvalidMove,
    Policy,
    apply_two_opt,
    exact_optimum,
    features,
    feasible_moves,
    generate_uniform,
    improve,
    k_step_lookahead,
    random_tour,
    tour_cost,
    two_opt_delta,
)

__all__ = [
    "CheckpointError",
    "ConfigError",
    "Error",
    "Instance",
    "InvalidInput",
    "InvalidMove",
    "Policy",
    "apply_two_opt",
    "exact_optimum",
    "features",
    "feasible_moves",
    "generate_uniform",
    "improve",
    "k_step_lookahead",
    "random_tour",
    "tour_cost",
    "two_opt_delta",
]
