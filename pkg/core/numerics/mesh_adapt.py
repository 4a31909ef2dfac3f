"""Metric construction and metric-conforming node movement.

The adaptation metric intersects Hessian-based metrics of ``ln(E)`` (the
equilibrium variable ``|u|^2/2 + g theta (h + b)``) and ``ln(h)``. Nodes are
moved by minimizing a Huang-type equidistribution/alignment energy over the
computational coordinates with the physical mesh and metric frozen; the new
physical nodes are the images of the fixed computational mesh under the
inverse piecewise-linear map.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.optimize import brentq

from ..domain.dg import DGField
from ..domain.mesh import Mesh, locate_points
from ..domain.problem import AdaptConfig
from ..exceptions import MetricError
from ..utils.logging import LogCategory, MetricsCollector, create_logger
from .ripa_model import DEFAULT_DRY_TOL, DEFAULT_GRAVITY, temperature, velocities

logger = create_logger(__name__, LogCategory.MESH)


@dataclass
class MetricField:
    """Per-element SPD metric (N, d, d) and the regularization it was built with."""

    matrices: np.ndarray
    beta: Optional[float] = None

    @property
    def n_elements(self) -> int:
        return int(self.matrices.shape[0])

    @property
    def dim(self) -> int:
        return int(self.matrices.shape[1])

    def determinant(self) -> np.ndarray:
        return np.linalg.det(self.matrices)

    def density(self) -> np.ndarray:
        """sqrt(det M) per element."""
        return np.sqrt(self.determinant())

    def trace(self) -> np.ndarray:
        return np.trace(self.matrices, axis1=1, axis2=2)

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrices)


def _check_spd(M: np.ndarray, name: str) -> None:
    eig = np.linalg.eigvalsh(M)
    bad = np.flatnonzero(~np.all(eig > 0.0, axis=1))
    if bad.size:
        raise MetricError(f"{name} is not positive definite at element {int(bad[0])}", element=int(bad[0]))


# -- Hessian recovery ----------------------------------------------------------

def _quadratic_design(offsets: np.ndarray) -> np.ndarray:
    if offsets.shape[1] == 1:
        x = offsets[:, 0]
        return np.stack([np.ones_like(x), x, 0.5 * x * x], axis=1)
    x, y = offsets[:, 0], offsets[:, 1]
    return np.stack([np.ones_like(x), x, y, 0.5 * x * x, x * y, 0.5 * y * y], axis=1)


def _fit_hessian(offsets: np.ndarray, values: np.ndarray, scale: float) -> Optional[np.ndarray]:
    A = _quadratic_design(offsets / scale)
    coef, _, rank, _ = np.linalg.lstsq(A, values, rcond=None)
    if rank < A.shape[1]:
        return None
    if offsets.shape[1] == 1:
        return np.array([[coef[2]]]) / scale ** 2
    return np.array([[coef[3], coef[4]], [coef[4], coef[5]]]) / scale ** 2


def recover_hessian_from_samples(samples: np.ndarray, mesh: Mesh, centers: Optional[np.ndarray] = None) -> np.ndarray:
    """Least-squares quadratic fit over vertex patches of per-element samples.

    ``samples`` (N,) are values at ``centers`` (centroids by default).
    Rank-deficient patches widen to the two-ring, then fall back to zero.
    """
    samples = np.asarray(samples, dtype=float)
    centers = mesh.centroids if centers is None else centers
    patches = mesh.vertex_patches()
    dim = mesh.dim
    H = np.zeros((mesh.n_elements, dim, dim))
    fallback = 0
    for e, patch in enumerate(patches):
        scale = float(mesh.heights[e])
        fit = _fit_hessian(centers[patch] - centers[e], samples[patch], scale)
        if fit is None:
            wide = np.unique(np.concatenate([patches[p] for p in patch]))
            fit = _fit_hessian(centers[wide] - centers[e], samples[wide], scale)
        if fit is None:
            fallback += 1
            continue
        H[e] = 0.5 * (fit + fit.T)
    if fallback:
        logger.debug("Hessian recovery fell back to zero", elements=fallback)
    return H


def recover_hessian(field: DGField, mesh: Optional[Mesh] = None) -> np.ndarray:
    """Hessian (N, d, d) of the first component, from its values at element centroids."""
    mesh = mesh or field.mesh
    centroid_ref = np.full((1, mesh.dim), 1.0 / (mesh.dim + 1))
    phi = field.basis.evaluate_basis(centroid_ref)[0]
    samples = field.coeffs[:, :, 0] @ phi
    return recover_hessian_from_samples(samples, mesh)


# -- metrics ------------------------------------------------------------------

def _abs_matrix(H: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(H)
    return np.einsum("nij,nj,nkj->nik", V, np.abs(w), V)


def metric_from_hessian(H: np.ndarray, mesh: Mesh, beta_floor: float = 1e-12) -> MetricField:
    """Optimal-interpolation metric det(beta I + |H|)^(-1/(d+4)) (beta I + |H|).

    beta solves sum |K| det(beta I + |H|)^(2/(d+4)) = 2 sum |K| det(|H|)^(2/(d+4))
    (exponent 1/3 on triangles, 2/5 on segments), i.e. about half of the
    elements go to the regions the Hessian marks.
    """
    H = np.asarray(H, dtype=float)
    dim = H.shape[1]
    absH = _abs_matrix(H)
    eig = np.linalg.eigvalsh(absH)                     # (N, d), >= 0
    eig = np.maximum(eig, 0.0)
    area = mesh.measures
    expo = 2.0 / (dim + 4)

    def mass(beta: float) -> float:
        return float(np.sum(area * np.prod(beta + eig, axis=1) ** expo))

    target = 2.0 * mass(0.0)
    if target <= 0.0:
        beta = beta_floor
    else:
        hi = max(float(eig.max()), 1.0)
        while mass(hi) < target:
            hi *= 2.0
        beta = brentq(lambda b: mass(b) - target, 0.0, hi, xtol=1e-15 * hi, rtol=1e-15, maxiter=500)
        beta = max(beta, beta_floor)

    B = absH + beta * np.eye(dim)
    det_b = np.prod(beta + eig, axis=1)
    M = det_b[:, None, None] ** (-1.0 / (dim + 4)) * B
    return MetricField(matrices=M, beta=float(beta))


def intersect(M1: MetricField, M2: MetricField, delta: float = 1.0) -> MetricField:
    """Metric intersection of M1 and delta * M2 by simultaneous diagonalization."""
    A = np.asarray(M1.matrices, dtype=float)
    B = delta * np.asarray(M2.matrices, dtype=float)
    _check_spd(A, "first metric")
    _check_spd(B, "second metric")
    w, Q = np.linalg.eigh(A)
    half = np.einsum("nij,nj,nkj->nik", Q, np.sqrt(w), Q)
    inv_half = np.einsum("nij,nj,nkj->nik", Q, 1.0 / np.sqrt(w), Q)
    S = inv_half @ B @ inv_half
    S = 0.5 * (S + np.swapaxes(S, 1, 2))
    mu, P = np.linalg.eigh(S)
    core = np.einsum("nij,nj,nkj->nik", P, np.maximum(1.0, mu), P)
    out = half @ core @ half
    return MetricField(matrices=0.5 * (out + np.swapaxes(out, 1, 2)))


def smooth_metric(metric: MetricField, mesh: Mesh, sweeps: int) -> MetricField:
    """Average every metric with its face neighbors, ``sweeps`` times."""
    M = metric.matrices.copy()
    nbr = mesh.neighbors
    has = (nbr >= 0).astype(float)
    for _ in range(sweeps):
        total = M + np.einsum("nf,nfij->nij", has, M[np.maximum(nbr, 0)])
        M = total / (1.0 + has.sum(axis=1))[:, None, None]
    return MetricField(matrices=M, beta=metric.beta)


def adaptation_metric(
    state: DGField,
    bottom: DGField,
    cfg: AdaptConfig,
    g: float = DEFAULT_GRAVITY,
    dry_tol: float = DEFAULT_DRY_TOL,
) -> MetricField:
    """Intersection of the ln(E) and ln(h) metrics built from cell averages, then smoothed."""
    mesh = state.mesh
    U = state.cell_averages()
    b = bottom.cell_averages()[:, 0]
    vel = velocities(U, dry_tol)
    energy = 0.5 * np.sum(vel * vel, axis=1) + g * temperature(U, dry_tol) * (U[:, 0] + b)
    ln_energy = np.log(np.maximum(energy, cfg.energy_floor))
    ln_depth = np.log(np.maximum(U[:, 0], cfg.h_floor))

    M_energy = metric_from_hessian(recover_hessian_from_samples(ln_energy, mesh), mesh, cfg.beta_floor)
    M_depth = metric_from_hessian(recover_hessian_from_samples(ln_depth, mesh), mesh, cfg.beta_floor)
    metric = intersect(M_energy, M_depth, cfg.delta)
    return smooth_metric(metric, mesh, cfg.smoothing_sweeps)


# -- mover --------------------------------------------------------------------

class _EnergyFunctional:
    """Huang energy over computational coordinates with frozen physical mesh and metric."""

    def __init__(self, mesh: Mesh, metric: MetricField, theta: float, p: float):
        self.mesh = mesh
        self.dim = mesh.dim
        self.elements = mesh.elements
        self.E_inv = mesh.inverse_jacobian
        self.area = mesh.measures
        self.M_inv = metric.inverse()
        self.sqrt_det = np.sqrt(metric.determinant())
        self.theta = theta
        self.p = p
        self.q = self.dim * p / 2.0

    def edge_matrices(self, xi: np.ndarray) -> np.ndarray:
        v = xi[self.elements]
        return np.swapaxes(v[:, 1:] - v[:, :1], 1, 2)      # (N, d, d), columns xi_j - xi_0

    def energy(self, xi: np.ndarray) -> np.ndarray:
        """Per-element energies."""
        Xi = self.edge_matrices(xi)
        Jm = Xi @ self.E_inv
        T = np.einsum("nij,njk,nik->n", Jm, self.M_inv, Jm)
        det_j = np.linalg.det(Jm)
        s = self.sqrt_det
        A = self.theta * s * T ** self.q
        B = (1.0 - 2.0 * self.theta) * self.dim ** self.q * s * (np.maximum(det_j, 0.0) / s) ** self.p
        return self.area * (A + B)

    def gradient(self, xi: np.ndarray) -> np.ndarray:
        """d(total energy)/d(xi) per vertex (Nv, d)."""
        Xi = self.edge_matrices(xi)
        Jm = Xi @ self.E_inv
        T = np.einsum("nij,njk,nik->n", Jm, self.M_inv, Jm)
        det_j = np.linalg.det(Jm)
        s = self.sqrt_det
        E_inv_T = np.swapaxes(self.E_inv, 1, 2)
        dT = 2.0 * Jm @ self.M_inv @ E_inv_T
        dA = (self.theta * s * self.q * T ** (self.q - 1.0))[:, None, None] * dT
        B = (1.0 - 2.0 * self.theta) * self.dim ** self.q * s * (np.maximum(det_j, 0.0) / s) ** self.p
        dB = (self.p * B)[:, None, None] * np.swapaxes(np.linalg.inv(Xi), 1, 2)
        dXi = self.area[:, None, None] * (dA + dB)                     # (N, d, d)

        per_vertex = np.zeros((self.elements.shape[0], self.dim + 1, self.dim))
        per_vertex[:, 1:, :] = np.swapaxes(dXi, 1, 2)
        per_vertex[:, 0, :] = -per_vertex[:, 1:, :].sum(axis=1)
        grad = np.zeros((self.mesh.n_vertices, self.dim))
        np.add.at(grad, self.elements, per_vertex)
        return grad


def _measures_positive(mesh: Mesh, coords: np.ndarray) -> bool:
    v = coords[mesh.elements]
    if mesh.dim == 1:
        det = v[:, 1, 0] - v[:, 0, 0]
    else:
        a, b = v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]
        det = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    return bool(np.all(det > 0.0))


def _minimize_computational(
    functional: _EnergyFunctional,
    xi0: np.ndarray,
    mobility: np.ndarray,
    iterations: int,
) -> np.ndarray:
    """Damped, preconditioned gradient descent with Armijo backtracking."""
    mesh = functional.mesh
    elements = mesh.elements
    xi = xi0.copy()
    for _ in range(iterations):
        e = functional.energy(xi)
        g = functional.gradient(xi) * mobility
        sizes = np.abs(np.linalg.det(functional.edge_matrices(xi))) ** (1.0 / mesh.dim)
        h_v = np.full(mesh.n_vertices, np.inf)
        e_v = np.zeros(mesh.n_vertices)
        for local in range(elements.shape[1]):
            np.minimum.at(h_v, elements[:, local], sizes)
            np.add.at(e_v, elements[:, local], e)
        direction = -g * (h_v ** 2 / np.maximum(e_v, 1e-300))[:, None]
        length = np.linalg.norm(direction, axis=1)
        cap = 0.3 * h_v
        direction *= np.minimum(1.0, cap / np.maximum(length, 1e-300))[:, None]
        slope = float(np.sum(g * direction))
        if slope >= 0.0 or not np.any(direction):
            break
        total = float(e.sum())
        step = 1.0
        accepted = False
        for _ in range(30):
            trial = xi + step * direction
            if _measures_positive(mesh, trial) and float(functional.energy(trial).sum()) <= total + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        xi = trial
    return xi


def _inverse_map(mesh: Mesh, xi: np.ndarray, xi_hat: np.ndarray) -> np.ndarray:
    """Physical images of the points xi_hat under the piecewise-linear map xi -> x."""
    if mesh.dim == 1:
        order = np.argsort(xi[:, 0])
        return np.interp(xi_hat[:, 0], xi[order, 0], mesh.vertices[order, 0])[:, None]
    comp = mesh.with_vertices(xi)
    elems, ref, _ = locate_points(comp, xi_hat)
    x0 = mesh.vertices[mesh.elements[elems, 0]]
    return x0 + np.einsum("pij,pj->pi", mesh.jacobian[elems], ref)


def move_mesh(
    mesh: Mesh,
    metric: MetricField,
    cfg: AdaptConfig,
    reference_vertices: Optional[np.ndarray] = None,
    metrics: Optional[MetricsCollector] = None,
) -> np.ndarray:
    """New vertex coordinates (same connectivity) conforming to the metric.

    ``reference_vertices`` is the fixed computational mesh, normally the
    initial mesh; the current mesh is used when omitted. Fixed coordinates
    never move and the result always has positive element measures; if that
    cannot be achieved the input coordinates are returned.
    """
    xi_hat = mesh.vertices.copy() if reference_vertices is None else np.asarray(reference_vertices, dtype=float)
    mobility = mesh.topology.vertex_mobility
    functional = _EnergyFunctional(mesh, metric, cfg.theta, cfg.p)
    xi = _minimize_computational(functional, xi_hat, mobility, cfg.mover_iterations)

    target = _inverse_map(mesh, xi, xi_hat)
    target = np.where(mobility > 0.0, target, mesh.vertices)
    old = mesh.vertices

    for attempt in range(12):
        step = 0.5 ** attempt
        candidate = old + step * (target - old)
        if all(_measures_positive(mesh, (1.0 - s) * old + s * candidate) for s in (0.25, 0.5, 0.75, 1.0)):
            if attempt and metrics is not None:
                metrics.increment_counter("mover_backtracks", attempt)
            return candidate
    logger.warning("mesh movement rejected; keeping the current mesh")
    if metrics is not None:
        metrics.increment_counter("mover_rejections")
    return old.copy()


def element_density_ratio(mesh: Mesh, band: np.ndarray) -> float:
    """Mean element density (1/|K|) inside a band of elements over the mean outside it."""
    band = np.asarray(band, dtype=bool)
    density = 1.0 / mesh.measures
    if not np.any(band) or np.all(band):
        return 1.0
    return float(density[band].mean() / density[~band].mean())


__all__: List[str] = [
    "MetricField",
    "recover_hessian",
    "recover_hessian_from_samples",
    "metric_from_hessian",
    "intersect",
    "smooth_metric",
    "adaptation_metric",
    "move_mesh",
    "element_density_ratio",
]
