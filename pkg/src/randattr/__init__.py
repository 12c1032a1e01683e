"""Random attractors of discrete-time random dynamical systems, estimated from ensembles."""
from .cloud import Box, Neighborhood, PointCloud, cover_contains, fit_compact, hausdorff, prune, semidist
from .cocycle import (SystemSpec, affine_series, cocycle_residual, continuity_probe, evolve, make_affine,
                      make_contraction, make_double_well, make_identity, make_logistic, make_rotation,
                      pullback, system_from_config)
from .construct import (Schedule, build_strong_B, build_strong_C, build_weak, build_weak_C, find_schedule,
                        find_schedule_C, weak_ensemble)
from .driver import DriverPath, NoiseSpec, increment, make_driver, shift, stationarity_check
from .errors import ConfigError, DivergenceError, RangeError, ScheduleInfeasible, WeakConstructionUnstable
from .omega import OmegaConfig, invariance_check, omega_limit
from .verify import check_strong_criterion, check_weak_criterion, check_weak_equals_strong, classify_attraction

__version__ = "0.1.0"

__all__ = [
    "Box", "Neighborhood", "PointCloud", "cover_contains", "fit_compact", "hausdorff", "prune", "semidist",
    "SystemSpec", "affine_series", "cocycle_residual", "continuity_probe", "evolve", "make_affine",
    "make_contraction", "make_double_well", "make_identity", "make_logistic", "make_rotation", "pullback",
    "system_from_config", "Schedule", "build_strong_B", "build_strong_C", "build_weak", "build_weak_C",
    "find_schedule", "find_schedule_C", "weak_ensemble", "DriverPath", "NoiseSpec", "increment", "make_driver",
    "shift", "stationarity_check", "ConfigError", "DivergenceError", "RangeError", "ScheduleInfeasible",
    "WeakConstructionUnstable", "OmegaConfig", "invariance_check", "omega_limit", "check_strong_criterion",
    "check_weak_criterion", "check_weak_equals_strong", "classify_attraction",
]
