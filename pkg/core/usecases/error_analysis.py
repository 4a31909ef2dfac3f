"""Error norms against exact or fine-mesh reference solutions."""

from abc import ABC, abstractmethod
from typing import Callable, Tuple

import numpy as np

from ..domain.dg import DGField
from ..domain.mesh import face_table, locate_points
from ..domain.problem import LakeAtRestSpec
from ..domain.problems import output_variables
from ..domain.report import ErrorReport
from ..utils.logging import LogCategory, create_logger

logger = create_logger(__name__, LogCategory.SOLVER)


def output_values(U: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(h + b, momenta..., eta) from conserved values (..., nc) and bottom values (...)."""
    return np.concatenate([(U[..., 0] + b)[..., None], U[..., 1:]], axis=-1)


class ReferenceSolution(ABC):
    """Reference values of the output variables at physical points."""

    @abstractmethod
    def evaluate(self, points: np.ndarray, bottom_values: np.ndarray) -> np.ndarray:
        """
        Args:
            points: Physical points (M, dim)
            bottom_values: Discrete bottom of the measured run at those points (M,)

        Returns:
            (M, n_vars) values of (h + b, momenta, eta)
        """
        pass


class LakeAtRestReference(ReferenceSolution):
    """h + b = C2, zero momentum, eta = C1 (C2 - b) on the run's own bottom."""

    def __init__(self, spec: LakeAtRestSpec, dim: int):
        self.spec = spec
        self.dim = dim

    def evaluate(self, points: np.ndarray, bottom_values: np.ndarray) -> np.ndarray:
        out = np.zeros((points.shape[0], self.dim + 2))
        out[:, 0] = self.spec.c2
        out[:, -1] = self.spec.c1 * (self.spec.c2 - bottom_values)
        return out


class FunctionReference(ReferenceSolution):
    """Closed-form reference ``f(points) -> (M, n_vars)``."""

    def __init__(self, function: Callable[[np.ndarray], np.ndarray]):
        self.function = function

    def evaluate(self, points: np.ndarray, bottom_values: np.ndarray) -> np.ndarray:
        return np.asarray(self.function(points), dtype=float).reshape(points.shape[0], -1)


class FieldReference(ReferenceSolution):
    """A (finer) discrete solution sampled by point location."""

    def __init__(self, state: DGField, bottom: DGField):
        self.state = state
        self.bottom = bottom

    def evaluate(self, points: np.ndarray, bottom_values: np.ndarray) -> np.ndarray:
        mesh = self.state.mesh
        elems, ref, found = locate_points(mesh, points)
        missing = int(np.count_nonzero(~found))
        if missing:
            logger.warning("reference point location fell back to nearest element", points=missing)
        phi = self.state.basis.evaluate_basis(ref)                      # (M, nb)
        U = np.einsum("mj,mjc->mc", phi, self.state.coeffs[elems])
        b = np.einsum("mj,mj->m", phi, self.bottom.coeffs[elems, :, 0])
        return output_values(U, b)


def _sample_tables(state: DGField) -> Tuple[np.ndarray, np.ndarray]:
    """Reference points and basis values used for the L-infinity sample."""
    basis = state.basis
    dim = basis.dim
    faces = [face_table(dim, f, 0) for f in range(dim + 1)]
    edge_points = basis.face_ref_points[faces].reshape(-1, dim)
    points = np.concatenate([basis.quad_points, edge_points], axis=0)
    return points, basis.evaluate_basis(points)


def compute_errors(
    state: DGField,
    bottom: DGField,
    reference: ReferenceSolution,
    problem: str = "",
    t: float = 0.0,
    reference_kind: str = "exact",
) -> ErrorReport:
    """L1 by element quadrature and L-infinity over quadrature and edge points."""
    mesh = state.mesh
    basis = state.basis
    variables = list(output_variables(mesh.dim))

    xq = mesh.to_physical(basis.quad_points)                            # (N, nq, d)
    Uq = state.quadrature_values()
    bq = bottom.quadrature_values()[..., 0]
    ref_q = reference.evaluate(xq.reshape(-1, mesh.dim), bq.reshape(-1)).reshape(Uq.shape)
    err_q = np.abs(output_values(Uq, bq) - ref_q)
    l1 = np.einsum("q,nqc,n->c", basis.quad_weights, err_q, mesh.jacobian_det)

    points, phi = _sample_tables(state)
    xs = mesh.to_physical(points)
    Us = state.values_at(phi)
    bs = bottom.values_at(phi)[..., 0]
    ref_s = reference.evaluate(xs.reshape(-1, mesh.dim), bs.reshape(-1)).reshape(Us.shape)
    linf = np.abs(output_values(Us, bs) - ref_s).max(axis=(0, 1))

    return ErrorReport(
        problem=problem,
        n_elements=mesh.n_elements,
        t=t,
        reference=reference_kind,
        variables=variables,
        l1={name: float(l1[i]) for i, name in enumerate(variables)},
        linf={name: float(linf[i]) for i, name in enumerate(variables)},
    )
