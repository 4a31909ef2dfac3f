"""Modal DG spaces: orthonormal reference bases, quadrature and field containers.

The reference basis is orthonormal under the reference-element inner
product, so the physical mass matrix on element K is ``det(J_K) * I`` and a
cell average is the constant-mode coefficient times ``phi_0``.
"""

from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import legendre as npleg

from ..exceptions import NonFiniteError, ValidationError
from .mesh import REFERENCE_TRIANGLE, Mesh, face_table, face_vertices, n_face_tables

SUPPORTED_DEGREES = (1, 2, 3)


# -- quadrature ---------------------------------------------------------------

def gauss_legendre(n: int):
    """n-point Gauss-Legendre rule on [0, 1] (weights sum to 1)."""
    x, w = npleg.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_lobatto(n: int) -> np.ndarray:
    """n-point Gauss-Lobatto nodes on [0, 1] (endpoints included)."""
    if n < 2:
        raise ValueError("Gauss-Lobatto needs at least two points")
    interior = npleg.legroots(npleg.legder(np.eye(n)[n - 1])) if n > 2 else np.array([])
    nodes = np.concatenate([[-1.0], np.sort(np.real(interior)), [1.0]])
    return 0.5 * (nodes + 1.0)


def triangle_rule(n: int):
    """Collapsed (Duffy) Gauss rule on the reference triangle.

    ``x = u (1 - v), y = v`` with n x n Gauss-Legendre points; exact for total
    degree ``2n - 2``. Weights sum to the triangle area 1/2.
    """
    g, w = gauss_legendre(n)
    u, v = np.meshgrid(g, g, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    points = np.stack([(u * (1.0 - v)).ravel(), v.ravel()], axis=1)
    weights = (wu * wv * (1.0 - v)).ravel()
    return points, weights


# -- basis --------------------------------------------------------------------

def _monomial_exponents(k: int):
    return [(d - j, j) for d in range(k + 1) for j in range(d + 1)]


class ReferenceBasis:
    """Orthonormal modal basis with cached quadrature tables.

    Attributes
    ----------
    quad_points, quad_weights
        Element rule (weights sum to the reference measure).
    phi, dphi
        Basis values ``(nq, nb)`` and reference gradients ``(nq, nb, dim)``.
    edge_points, edge_weights
        Edge rule on the unit parameter interval (weights sum to 1).
    face_phi
        Basis values at edge points for every face/orientation table
        ``(n_tables, ne, nb)``.
    pp_points, pp_phi
        Positivity point set G_p and basis values there.
    """

    def __init__(self, dim: int, degree: int):
        if dim not in (1, 2):
            raise ValidationError(f"unsupported dimension {dim}", field="dim")
        if degree not in SUPPORTED_DEGREES:
            raise ValidationError(f"unsupported degree k={degree}; expected one of {SUPPORTED_DEGREES}", field="degree")
        self.dim = dim
        self.degree = degree
        self.n_basis = degree + 1 if dim == 1 else (degree + 1) * (degree + 2) // 2
        self.reference_measure = 1.0 if dim == 1 else 0.5

        if dim == 1:
            self.quad_points, self.quad_weights = gauss_legendre(2 * degree + 1)
            self.quad_points = self.quad_points[:, None]
        else:
            self.quad_points, self.quad_weights = triangle_rule(degree + 2)
            self._build_triangle_coefficients()

        self.phi = self.evaluate_basis(self.quad_points)
        self.dphi = self.evaluate_gradients(self.quad_points)
        self.phi0 = 1.0 / np.sqrt(self.reference_measure)

        if dim == 1:
            self.edge_points, self.edge_weights = np.zeros(1), np.ones(1)
        else:
            self.edge_points, self.edge_weights = gauss_legendre(2 * degree + 1)

        self.face_ref_points = np.stack([self._face_points(t) for t in range(n_face_tables(dim))])
        self.face_phi = np.stack([self.evaluate_basis(p) for p in self.face_ref_points])

        self.pp_points = self._positivity_points()
        self.pp_phi = self.evaluate_basis(self.pp_points)

    # -- construction helpers -------------------------------------------------
    def _build_triangle_coefficients(self) -> None:
        """Gram-Schmidt (two Cholesky passes) of centroid-centred monomials."""
        self._exponents = _monomial_exponents(self.degree)
        coeffs = np.eye(self.n_basis)
        mono = self._monomials(self.quad_points)
        for _ in range(2):
            values = mono @ coeffs.T
            gram = values.T @ (self.quad_weights[:, None] * values)
            chol = np.linalg.cholesky(gram)
            coeffs = np.linalg.solve(chol, coeffs)
        self._coeffs = coeffs

    def _monomials(self, points):
        x = (points[:, 0] - 1.0 / 3.0) * 3.0
        y = (points[:, 1] - 1.0 / 3.0) * 3.0
        return np.stack([x ** a * y ** b for a, b in self._exponents], axis=1)

    def _monomial_gradients(self, points):
        x = (points[:, 0] - 1.0 / 3.0) * 3.0
        y = (points[:, 1] - 1.0 / 3.0) * 3.0
        cols = []
        for a, b in self._exponents:
            gx = 3.0 * a * x ** max(a - 1, 0) * y ** b if a else np.zeros_like(x)
            gy = 3.0 * b * x ** a * y ** max(b - 1, 0) if b else np.zeros_like(y)
            cols.append(np.stack([gx, gy], axis=1))
        return np.stack(cols, axis=1)

    def _face_points(self, table: int) -> np.ndarray:
        if self.dim == 1:
            return np.array([[float(table)]])
        face, flip = divmod(table, 2)
        a, b = face_vertices(2, face)
        if flip:
            a, b = b, a
        s = self.edge_points[:, None]
        return (1.0 - s) * REFERENCE_TRIANGLE[a] + s * REFERENCE_TRIANGLE[b]

    def _positivity_points(self) -> np.ndarray:
        lobatto = gauss_lobatto(self.degree + 2)
        if self.dim == 1:
            return lobatto[:, None]
        gauss = self.edge_points
        points = []
        for i in range(3):
            j, m = (i + 1) % 3, (i + 2) % 3
            for lam_i in lobatto:
                for g in gauss:
                    lam = np.zeros(3)
                    lam[i] = lam_i
                    lam[j] = (1.0 - lam_i) * g
                    lam[m] = (1.0 - lam_i) * (1.0 - g)
                    points.append(lam[1:])
        return np.array(points)

    # -- evaluation -----------------------------------------------------------
    def evaluate_basis(self, points: np.ndarray) -> np.ndarray:
        """Basis values (P, nb) at reference points (P, dim)."""
        points = np.asarray(points, dtype=float).reshape(-1, self.dim)
        if self.dim == 1:
            t = 2.0 * points[:, 0] - 1.0
            return np.stack(
                [np.sqrt(2 * j + 1) * npleg.legval(t, np.eye(self.n_basis)[j]) for j in range(self.n_basis)],
                axis=1,
            )
        return self._monomials(points) @ self._coeffs.T

    def evaluate_gradients(self, points: np.ndarray) -> np.ndarray:
        """Reference gradients (P, nb, dim)."""
        points = np.asarray(points, dtype=float).reshape(-1, self.dim)
        if self.dim == 1:
            t = 2.0 * points[:, 0] - 1.0
            cols = [
                2.0 * np.sqrt(2 * j + 1) * npleg.legval(t, npleg.legder(np.eye(self.n_basis)[j]))
                for j in range(self.n_basis)
            ]
            return np.stack(cols, axis=1)[:, :, None]
        return np.einsum("ij,pjd->pid", self._coeffs, self._monomial_gradients(points))

    def face_table_for(self, face: int, flip: int = 0) -> int:
        return face_table(self.dim, face, flip)


@lru_cache(maxsize=None)
def build_basis(dim: int, k: int) -> ReferenceBasis:
    """Shared, immutable reference basis for (dim, k)."""
    return ReferenceBasis(dim, k)


# -- fields -------------------------------------------------------------------

class DGField:
    """Per-element modal coefficients ``(N, nb, n_comp)`` on a mesh."""

    def __init__(self, mesh: Mesh, basis: ReferenceBasis, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim == 2:
            coeffs = coeffs[:, :, None]
        if coeffs.shape[:2] != (mesh.n_elements, basis.n_basis):
            raise ValidationError(
                f"coefficient shape {coeffs.shape} does not match mesh/basis "
                f"({mesh.n_elements}, {basis.n_basis}, n_comp)"
            )
        self.mesh = mesh
        self.basis = basis
        self.coeffs = coeffs

    @property
    def n_comp(self) -> int:
        return int(self.coeffs.shape[2])

    def copy(self) -> "DGField":
        return DGField(self.mesh, self.basis, self.coeffs.copy())

    def with_coeffs(self, coeffs: np.ndarray, mesh: Optional[Mesh] = None) -> "DGField":
        return DGField(mesh or self.mesh, self.basis, coeffs)

    def component(self, i: int) -> "DGField":
        return DGField(self.mesh, self.basis, self.coeffs[:, :, i : i + 1].copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coeffs)))

    def values_at(self, table: np.ndarray) -> np.ndarray:
        """Values (N, P, n_comp) at points whose basis table is (P, nb)."""
        return np.einsum("pj,njc->npc", table, self.coeffs)

    def quadrature_values(self) -> np.ndarray:
        return self.values_at(self.basis.phi)

    def pp_values(self) -> np.ndarray:
        return self.values_at(self.basis.pp_phi)

    def cell_averages(self) -> np.ndarray:
        return self.coeffs[:, 0, :] * self.basis.phi0


def evaluate(field: DGField, element: int, point) -> np.ndarray:
    """Field value(s) at a reference point of one element."""
    phi = field.basis.evaluate_basis(np.reshape(point, (1, field.basis.dim)))[0]
    return phi @ field.coeffs[element]


def l2_project(
    f: Callable[[np.ndarray], np.ndarray],
    mesh: Mesh,
    basis: ReferenceBasis,
) -> DGField:
    """Element-wise L2 projection of a pointwise function of physical points.

    ``f`` takes points of shape (P, dim) and returns (P,) or (P, n_comp).
    """
    xq = mesh.to_physical(basis.quad_points)                  # (N, nq, dim)
    values = np.asarray(f(xq.reshape(-1, mesh.dim)), dtype=float)
    values = values.reshape(mesh.n_elements, basis.quad_points.shape[0], -1)
    bad = ~np.isfinite(values)
    if bad.any():
        element = int(np.argwhere(bad)[0, 0])
        raise NonFiniteError(f"non-finite initial value at a quadrature point of element {element}", element=element)
    # mass matrix is det(J) * I, and the det(J) from the integral cancels it
    coeffs = np.einsum("q,qj,nqc->njc", basis.quad_weights, basis.phi, values)
    return DGField(mesh, basis, coeffs)


def integrate(field: DGField, element: Optional[int] = None) -> np.ndarray:
    """Integral of a field over one element or every element (N, n_comp)."""
    values = field.quadrature_values()
    totals = np.einsum("q,nqc->nc", field.basis.quad_weights, values) * field.mesh.jacobian_det[:, None]
    return totals if element is None else totals[element]


def integrate_function(g: Callable[[np.ndarray], np.ndarray], mesh: Mesh, basis: ReferenceBasis) -> np.ndarray:
    """Quadrature of a pointwise function over every element (N,)."""
    xq = mesh.to_physical(basis.quad_points)
    values = np.asarray(g(xq.reshape(-1, mesh.dim)), dtype=float).reshape(mesh.n_elements, -1)
    return (values @ basis.quad_weights) * mesh.jacobian_det


def integrate_edge(values: np.ndarray, mesh: Mesh, basis: ReferenceBasis, edge: int) -> float:
    """Edge quadrature of values sampled at the edge points of one edge."""
    return float(np.dot(basis.edge_weights, values) * mesh.edge_lengths[edge])


def cell_average(field: DGField, element: int) -> np.ndarray:
    return field.coeffs[element, 0, :] * field.basis.phi0
