"""Obstacle problems for the fast-diffusion porous medium equation.

Two constructions of the constrained solution are provided: an implicit
variational-inequality solver and a monotone sweep converging to the
minimal supersolution above the obstacle.  A verification layer checks
the structural properties the two constructions are expected to satisfy,
above all that they coincide.
"""

from .grid import ScalarField, SpaceTimeGrid
from .mollifier import MollifierParams, mollify, mollifier_identity_residual
from .pme import (BoundaryData, NewtonDiverged, PmeParameters, SolveReport,
                  barenblatt, pme_solve, pme_step, weak_residual)

__all__ = [
    "BoundaryData",
    "MollifierParams",
    "NewtonDiverged",
    "PmeParameters",
    "ScalarField",
    "SolveReport",
    "SpaceTimeGrid",
    "barenblatt",
    "mollify",
    "mollifier_identity_residual",
    "pme_solve",
    "pme_step",
    "weak_residual",
]

__version__ = "0.1.0"
