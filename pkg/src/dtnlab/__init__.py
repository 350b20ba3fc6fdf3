"""Numerical laboratory for discrete Dirichlet-to-Neumann operators of elliptic operators with advection."""

from dtnlab.assembly import AssembledSystem, assemble, assemble_robin
from dtnlab.coefficients import CoefficientSet, check_conditions, preset
from dtnlab.dtn import DtnOperator, NotHarmonic, SpectrumHit, build, lift
from dtnlab.mesh import Mesh, generate, refine

__version__ = "0.1.0"

__all__ = [
    "AssembledSystem",
    "CoefficientSet",
    "DtnOperator",
    "Mesh",
    "NotHarmonic",
    "SpectrumHit",
    "assemble",
    "assemble_robin",
    "build",
    "check_conditions",
    "generate",
    "lift",
    "preset",
    "refine",
]
