"""Numerical toolkit for dual-curvature prescription on symmetric convex bodies.

Solves the measure equation that prescribes the support-weighted dual curvature
of a convex body with respect to a star body, restricted to bodies invariant
under a finite orthogonal symmetry group, and verifies the quantitative
estimates (box dual-volume brackets, volume-product inequalities) that back
the solver's compactness argument.
"""

__version__ = "0.1.0"

from .sphere import SphericalGrid, build_grid, integrate, sphere_area, unit_ball_volume

__all__ = [
    "SphericalGrid",
    "build_grid",
    "integrate",
    "sphere_area",
    "unit_ball_volume",
    "__version__",
]
