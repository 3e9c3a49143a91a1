"""Conic modelling and an interior-point solver for LP, SOC and PSD cones."""

from .cones import ConeDims, smat, svec
from .ipm import IPMResult, solve_conic
from .program import (
    STATUS_INFEASIBLE,
    STATUS_ITERATION_LIMIT,
    STATUS_OPTIMAL,
    Affine,
    ConicProgram,
    ConicSolution,
    RotatedCone,
    SolverFailure,
    power_tower,
    tower_leaves,
)

__all__ = [
    "Affine",
    "ConeDims",
    "ConicProgram",
    "ConicSolution",
    "IPMResult",
    "RotatedCone",
    "SolverFailure",
    "STATUS_INFEASIBLE",
    "STATUS_ITERATION_LIMIT",
    "STATUS_OPTIMAL",
    "power_tower",
    "smat",
    "solve_conic",
    "svec",
    "tower_leaves",
]
