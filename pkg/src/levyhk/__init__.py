"""Numerical toolkit for isotropic unimodal Levy processes with slowly
varying small-jump intensity: scale functions, free and killed heat
kernels, exact-increment Monte Carlo and two-sided envelope verification.
"""

from .scalekit import (WeightFunction, ScaleKit, ScalingCheckResult,
                       check_scaling, check_almost_monotone)

__all__ = [
    "WeightFunction", "ScaleKit", "ScalingCheckResult",
    "check_scaling", "check_almost_monotone",
]
