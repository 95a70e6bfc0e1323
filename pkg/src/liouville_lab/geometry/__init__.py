"""Obstacles, geometric predicates, boundary metrics and grid masks."""
from .boundary import GeometryError, ObstacleBoundary
from .families import (
    FAMILIES,
    CounterexampleParams,
    make_comb,
    make_counterexample,
    make_disk,
    make_family,
    make_spiky_disk,
)
from .grid import ACTIVE, DIRICHLET, OBSTACLE, DiscreteOperator, GridMask, rasterize
from .metrics import boundary_distance_C0, boundary_distance_C1
from .predicates import (
    DirConvexResult,
    StarShapeResult,
    is_directionally_convex,
    is_star_shaped,
    star_kernel,
)

__all__ = [
    "ACTIVE",
    "DIRICHLET",
    "FAMILIES",
    "OBSTACLE",
    "CounterexampleParams",
    "DirConvexResult",
    "DiscreteOperator",
    "GeometryError",
    "GridMask",
    "ObstacleBoundary",
    "StarShapeResult",
    "boundary_distance_C0",
    "boundary_distance_C1",
    "is_directionally_convex",
    "is_star_shaped",
    "make_comb",
    "make_counterexample",
    "make_disk",
    "make_family",
    "make_spiky_disk",
    "rasterize",
    "star_kernel",
]
