"""Domain entities for the Ripa moving-mesh DG solver."""

from .dg import DGField, ReferenceBasis, build_basis, l2_project
from .mesh import BoundaryKind, Mesh, MeshBlend, MeshTopology, build_mesh, interval_mesh, rectangle_mesh
from .problem import AdaptConfig, LakeAtRestSpec, LimiterConfig, MeshMode, ProblemConfig, ReferenceKind, StepControl
from .problems import PROBLEMS, ProblemDefinition, get_problem, project_initial
from .report import ConvergenceTable, ErrorReport, convergence_orders

__all__ = [
    "DGField",
    "ReferenceBasis",
    "build_basis",
    "l2_project",
    "BoundaryKind",
    "Mesh",
    "MeshBlend",
    "MeshTopology",
    "build_mesh",
    "interval_mesh",
    "rectangle_mesh",
    "AdaptConfig",
    "LakeAtRestSpec",
    "LimiterConfig",
    "MeshMode",
    "ProblemConfig",
    "ReferenceKind",
    "StepControl",
    "PROBLEMS",
    "ProblemDefinition",
    "get_problem",
    "project_initial",
    "ConvergenceTable",
    "ErrorReport",
    "convergence_orders",
]
