"""Entropic interpolations and entropy-power concavity on grids."""

from .bridge import Decomposition, InterpolationSample, continuity_residual, interpolate, solve_schrodinger
from .calculus import GeometryConfig, curvature_bound
from .functionals import DeficitReport, FunctionalReport, entropy, entropy_power, evaluate, fisher
from .grid import DensityField, Grid, GridSpec, ScalarField, box, build_grid, circle, integrate, normalize
from .semigroup import apply, build_semigroup
from .verdict import CurveReport, build_curve, check_costa, check_euclidean, check_weighted

__all__ = [
    "Decomposition", "InterpolationSample", "continuity_residual", "interpolate", "solve_schrodinger",
    "GeometryConfig", "curvature_bound", "DeficitReport", "FunctionalReport", "entropy",
    "entropy_power", "evaluate", "fisher", "DensityField", "Grid", "GridSpec", "ScalarField", "box",
    "build_grid", "circle", "integrate", "normalize", "apply", "build_semigroup", "CurveReport",
    "build_curve", "check_costa", "check_euclidean", "check_weighted",
]
