"""Ruelle transfer operators and Gibbs measures for weighted backward shifts on ``c0`` and ``l^p``."""

__version__ = "0.1.0"

from .apriori import AprioriMeasure, GrowthLaw, TailClass, adapted_tails_check, fast_tail_criteria
from .errors import (
    ConfigInvalid,
    NotNormalized,
    PremiseViolated,
    RuelleShiftError,
)
from .grid import GridFunction
from .potential import Potential, is_normalized, normalize
from .space import MetricSpec, Point, SpaceKind, apply_L, dist, norm, preimage
from .transfer import EigenPair, GridSpec, eigenpair, holder_certificate, power_iterate
from .weights import Verdict, WeightSequence, classify, d_n, rgh_indicators, summability
from .wasserstein import EmpiricalMeasure, w1
from .gibbs import iterate_to_gibbs, push_dual
from .contraction import (
    global_contraction_experiment,
    local_contraction_experiment,
    metric_scale,
    rn_profile,
    tails_contraction_factor,
)

__all__ = [
    "AprioriMeasure", "ConfigInvalid", "EigenPair", "EmpiricalMeasure", "GridFunction", "GridSpec", "GrowthLaw",
    "MetricSpec", "NotNormalized", "Point", "Potential", "PremiseViolated", "RuelleShiftError", "SpaceKind",
    "TailClass", "Verdict", "WeightSequence", "adapted_tails_check", "apply_L", "classify", "d_n", "dist",
    "eigenpair", "fast_tail_criteria", "global_contraction_experiment", "holder_certificate", "is_normalized",
    "iterate_to_gibbs", "local_contraction_experiment", "metric_scale", "norm", "normalize", "power_iterate",
    "preimage", "push_dual", "rgh_indicators", "rn_profile", "summability", "tails_contraction_factor", "w1",
]
