"""Symbolic-numeric toolkit for constant-rank differential operators.

Given a homogeneous constant-coefficient operator presented as a matrix-valued
polynomial symbol, the package certifies constant rank, constructs potential
operators, enumerates weakly continuous polynomial quantities (null
Lagrangians), and cross-validates everything on the periodic torus with a
spectral harness.
"""

from .polyalg import (
    DimensionMismatch,
    DomainError,
    HomPoly,
    PolyMatrix,
    RationalMatrix,
    faddeev_leverrier,
    moore_penrose,
    multi_indices,
    polymatrix_mul,
)

__all__ = [
    "DimensionMismatch",
    "DomainError",
    "HomPoly",
    "PolyMatrix",
    "RationalMatrix",
    "faddeev_leverrier",
    "moore_penrose",
    "multi_indices",
    "polymatrix_mul",
]

__version__ = "0.1.0"
