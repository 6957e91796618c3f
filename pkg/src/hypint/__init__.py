"""Integral geometry in hyperbolic 3-space: curvature of surfaces with cone-like ends,
ideal defects of boundary curves, and Monte Carlo over the space of geodesics."""

from .errors import (BudgetError, ConfigError, DegenerateInputError, DomainError, GenerationError,
                     GeometryInconsistencyError, HypintError, OnCurveError, ThetaResolutionError)
from .estimate import Estimate
from .geom_core import (BoundaryPoint, Geodesic, HPoint, MobiusMap, apply_mobius, geodesic_point, geodesic_through,
                        hyp_distance)
from .curves import IdealCurve, circle, ellipse, perturbed_circle

__version__ = "0.1.0"

__all__ = [
    "BudgetError", "ConfigError", "DegenerateInputError", "DomainError", "GenerationError",
    "GeometryInconsistencyError", "HypintError", "OnCurveError", "ThetaResolutionError", "Estimate",
    "BoundaryPoint", "Geodesic", "HPoint", "MobiusMap", "apply_mobius", "geodesic_point", "geodesic_through",
    "hyp_distance", "IdealCurve", "circle", "ellipse", "perturbed_circle",
]
