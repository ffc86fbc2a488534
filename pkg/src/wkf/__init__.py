"""Woven K-fusion frames in finite-dimensional real spaces: optimal bounds,
wovenness certification, operator constructions and stability checks."""

__version__ = "0.1.0"

from .numerics import DEFAULT_TOL, ToleranceConfig
from .frames import (
    BoundReport,
    Subspace,
    WeightedFamily,
    certify_k_fusion_frame,
    fusion_operator,
    optimal_lower_k_bound,
    optimal_upper_bound,
)
from .weaving import (
    WeavingPattern,
    WeavingReport,
    bessel_weaving_bound,
    certify_woven_exhaustive,
    certify_woven_randomized,
    weaving_operator,
)

__all__ = [
    "DEFAULT_TOL",
    "ToleranceConfig",
    "BoundReport",
    "Subspace",
    "WeightedFamily",
    "certify_k_fusion_frame",
    "fusion_operator",
    "optimal_lower_k_bound",
    "optimal_upper_bound",
    "WeavingPattern",
    "WeavingReport",
    "bessel_weaving_bound",
    "certify_woven_exhaustive",
    "certify_woven_randomized",
    "weaving_operator",
]
