"""Use cases: simulation runs, error analysis and refinement studies."""

from .convergence import ConvergenceUseCase
from .error_analysis import FieldReference, FunctionReference, LakeAtRestReference, compute_errors
from .simulation import RunResult, SimulationUseCase, initial_mesh

__all__ = [
    "ConvergenceUseCase",
    "FieldReference",
    "FunctionReference",
    "LakeAtRestReference",
    "compute_errors",
    "RunResult",
    "SimulationUseCase",
    "initial_mesh",
]
