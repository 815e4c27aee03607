"""Discrete subordination of lattice random walks."""

from .bernstein import (BernsteinFunction, LevyMeasure, eval_phi, from_id, invert_phi,
                        log_example_exponent, pure_drift, stable_exponent)
from .errors import (ChfDomainError, ConfigError, NormalizationRequiredError, SubwalkError,
                     TruncationError)
from .lattice import LatticeDistribution, LatticeWalk
from .levy_embed import LevyTriplet, compare_triplets, triplet_hat, triplet_tilde
from .scaling_limits import ScaledProcessSpec, chf_limit, chf_scaled_exact, convergence_report
from .subordination import StepDistribution, sample_steps, step_weights

__all__ = [
    "BernsteinFunction", "LevyMeasure", "eval_phi", "from_id", "invert_phi",
    "log_example_exponent", "pure_drift", "stable_exponent",
    "ChfDomainError", "ConfigError", "NormalizationRequiredError", "SubwalkError",
    "TruncationError", "LatticeDistribution", "LatticeWalk", "LevyTriplet",
    "compare_triplets", "triplet_hat", "triplet_tilde", "ScaledProcessSpec", "chf_limit",
    "chf_scaled_exact", "convergence_report", "StepDistribution", "sample_steps",
    "step_weights",
]
