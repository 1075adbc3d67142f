"""Online auto-tuning of multi-process GNN training on multi-core CPUs.

The package searches the space of (processes, sampling cores, training cores)
configurations with a Gaussian-process Bayesian optimizer, and ships a
from-scratch mini-batch GNN workload plus a multi-process training engine to
tune against. Synthetic epoch-time landscapes stand in for large servers.
"""
from .config_space import Configuration, EmptySpaceError, InvalidConfigurationError, SearchSpace, normalize, validate
from .landscape import LandscapeParams, LandscapeTarget, preset_suite
from .tuners import (AnnealingSchedule, BayesTuner, ObservationTrace, TunerBudget, bayes_tune, default_policy,
                     exhaustive_search, simulated_annealing)

__version__ = "0.1.0"

__all__ = [
    "AnnealingSchedule", "BayesTuner", "Configuration", "EmptySpaceError", "InvalidConfigurationError",
    "LandscapeParams", "LandscapeTarget", "ObservationTrace", "SearchSpace", "TunerBudget", "bayes_tune",
    "default_policy", "exhaustive_search", "normalize", "preset_suite", "simulated_annealing", "validate",
]
