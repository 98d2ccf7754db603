"""Shell-infill topology optimization.

Explicit morphable components describe a uniform-thickness coating shell;
an implicit penalized density field with a local volume cap fills it with
porous infill.  Both are optimized simultaneously for minimum compliance.
"""

__version__ = "0.1.0"

from .driver import IterationRecord, RunOptions, RunResult, run
from .forward import ForwardModel, ForwardState, forward
from .geometry import Component, ComponentSet
from .mesh import LoadCase, MaterialModel, StructuredMesh
from .problems import (OptimizationParams, ProblemDefinition, checkgrad,
                       initial_design, lbeam, mbb, multiload)

__all__ = [
    "Component", "ComponentSet", "ForwardModel", "ForwardState",
    "IterationRecord", "LoadCase", "MaterialModel", "OptimizationParams",
    "ProblemDefinition", "RunOptions", "RunResult", "StructuredMesh",
    "checkgrad", "forward", "initial_design", "lbeam", "mbb", "multiload",
    "run",
]
