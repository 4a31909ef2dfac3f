"""Ripa-model physics and the well-balanced DG residual.

States are arrays whose last axis holds the conserved components
``(h, hu[, hv], eta)`` with ``eta = h * theta``; the number of components is
``dim + 2``. All point-wise functions broadcast over leading axes.
"""

from typing import Tuple

import numpy as np

from ..domain.dg import DGField, ReferenceBasis
from ..domain.mesh import EDGE_REFLECTIVE, Mesh
from ..exceptions import NonFiniteError, ValidationError
from ..utils.logging import LogCategory, create_logger

logger = create_logger(__name__, LogCategory.SOLVER)

DEFAULT_GRAVITY = 1.0
DEFAULT_DRY_TOL = 1e-6


def _split(U: np.ndarray):
    return U[..., 0], U[..., 1:-1], U[..., -1]


def velocities(U: np.ndarray, dry_tol: float = DEFAULT_DRY_TOL) -> np.ndarray:
    """Velocity vector (..., dim); zero where the depth is below dry_tol."""
    h, mom, _ = _split(U)
    wet = h > dry_tol
    return np.where(wet[..., None], mom / np.where(wet, h, 1.0)[..., None], 0.0)


def temperature(U: np.ndarray, dry_tol: float = DEFAULT_DRY_TOL) -> np.ndarray:
    """theta = eta / h; zero in dry cells."""
    h, _, eta = _split(U)
    wet = h > dry_tol
    return np.where(wet, eta / np.where(wet, h, 1.0), 0.0)


def _flux(U: np.ndarray, g: float, dry_tol: float) -> np.ndarray:
    """Flux tensor (..., n_comp, dim) with dry-safe velocities."""
    h, mom, eta = _split(U)
    vel = velocities(U, dry_tol)
    dim = mom.shape[-1]
    pressure = 0.5 * g * eta * h
    F = np.empty(U.shape + (dim,))
    F[..., 0, :] = mom
    F[..., 1:-1, :] = mom[..., :, None] * vel[..., None, :]
    for i in range(dim):
        F[..., 1 + i, i] += pressure
    F[..., -1, :] = eta[..., None] * vel
    return F


def physical_flux(U: np.ndarray, g: float = DEFAULT_GRAVITY, dry_tol: float = DEFAULT_DRY_TOL) -> np.ndarray:
    """Physical flux tensor (..., n_comp, dim).

    Column ``i`` is the flux in direction ``i``. Dry states must carry zero
    momentum (see ``limiters.dry_fix``).
    """
    U = np.asarray(U, dtype=float)
    h, mom, _ = _split(U)
    bad = (h < dry_tol) & np.any(mom != 0.0, axis=-1)
    if np.any(bad):
        raise ValidationError("nonzero momentum in a dry state; apply dry_fix first", field="U")
    return _flux(U, g, dry_tol)


def normal_flux(U: np.ndarray, n: np.ndarray, g: float = DEFAULT_GRAVITY, dry_tol: float = DEFAULT_DRY_TOL) -> np.ndarray:
    """F(U) . n, shape (..., n_comp)."""
    return np.einsum("...ci,...i->...c", _flux(U, g, dry_tol), n)


def source(U: np.ndarray, grad_b: np.ndarray, g: float = DEFAULT_GRAVITY) -> np.ndarray:
    """Bottom source (0, -g eta grad b, 0)."""
    U = np.asarray(U, dtype=float)
    S = np.zeros_like(U)
    S[..., 1:-1] = -g * U[..., -1][..., None] * np.asarray(grad_b)
    return S


def sound_speed(U: np.ndarray, g: float = DEFAULT_GRAVITY, dry_tol: float = DEFAULT_DRY_TOL) -> np.ndarray:
    """c = sqrt(g h theta) = sqrt(g eta); zero in dry cells."""
    h, _, eta = _split(U)
    return np.where(h > dry_tol, np.sqrt(g * np.maximum(eta, 0.0)), 0.0)


def max_wave_speed(
    U: np.ndarray, n: np.ndarray, g: float = DEFAULT_GRAVITY, dry_tol: float = DEFAULT_DRY_TOL
) -> np.ndarray:
    """|u . n| + c along a unit normal."""
    U = np.asarray(U, dtype=float)
    un = np.einsum("...i,...i->...", velocities(U, dry_tol), np.broadcast_to(n, U.shape[:-1] + (U.shape[-1] - 2,)))
    return np.abs(un) + sound_speed(U, g, dry_tol)


def lax_friedrichs(
    U_int: np.ndarray,
    U_ext: np.ndarray,
    n: np.ndarray,
    alpha: np.ndarray,
    g: float = DEFAULT_GRAVITY,
    dry_tol: float = DEFAULT_DRY_TOL,
) -> np.ndarray:
    """Lax-Friedrichs flux 1/2 [(F(U-) + F(U+)) . n - alpha (U+ - U-)]."""
    alpha = np.asarray(alpha, dtype=float)[..., None]
    central = normal_flux(U_int, n, g, dry_tol) + normal_flux(U_ext, n, g, dry_tol)
    return 0.5 * (central - alpha * (U_ext - U_int))


def hydrostatic_reconstruct(
    U_int: np.ndarray,
    U_ext: np.ndarray,
    b_int: np.ndarray,
    b_ext: np.ndarray,
    dry_tol: float = DEFAULT_DRY_TOL,
) -> Tuple[np.ndarray, np.ndarray]:
    """Interface states over the common bottom max(b-, b+).

    Depths become max(0, h + b - b*); momenta and eta are rescaled by the
    depth ratio so velocity and temperature are preserved.
    """
    b_star = np.maximum(b_int, b_ext)

    def rebuild(U, b):
        h = U[..., 0]
        h_star = np.maximum(0.0, h + b - b_star)
        wet = h >= dry_tol
        ratio = np.where(wet, h_star / np.where(wet, h, 1.0), 0.0)
        U_star = U * ratio[..., None]
        U_star[..., 0] = h_star
        return U_star

    return rebuild(U_int, b_int), rebuild(U_ext, b_ext)


def well_balanced_flux(
    U_int: np.ndarray,
    U_ext: np.ndarray,
    b_int: np.ndarray,
    b_ext: np.ndarray,
    n: np.ndarray,
    alpha: np.ndarray,
    g: float = DEFAULT_GRAVITY,
    dry_tol: float = DEFAULT_DRY_TOL,
) -> np.ndarray:
    """LF flux of the reconstructed states plus the interior correction (F(U-) - F(U-*)) . n."""
    star_int, star_ext = hydrostatic_reconstruct(U_int, U_ext, b_int, b_ext, dry_tol)
    correction = normal_flux(U_int, n, g, dry_tol) - normal_flux(star_int, n, g, dry_tol)
    return lax_friedrichs(star_int, star_ext, n, alpha, g, dry_tol) + correction


def ghost_state(U: np.ndarray, n: np.ndarray, kind: np.ndarray) -> np.ndarray:
    """Exterior trace at physical boundaries.

    Reflective walls mirror the normal momentum; outflow copies the trace.
    ``kind`` holds EDGE_* codes broadcast against the leading axes of U.
    """
    ghost = np.array(U, dtype=float, copy=True)
    mom = ghost[..., 1:-1]
    mn = np.einsum("...i,...i->...", mom, n)
    mirrored = mom - 2.0 * mn[..., None] * n
    wall = np.broadcast_to(np.asarray(kind) == EDGE_REFLECTIVE, mn.shape)
    ghost[..., 1:-1] = np.where(wall[..., None], mirrored, mom)
    return ghost


def eigenvectors(
    U: np.ndarray, n: np.ndarray, g: float = DEFAULT_GRAVITY, dry_tol: float = DEFAULT_DRY_TOL
) -> Tuple[np.ndarray, np.ndarray]:
    """Right and left eigenvectors of F'(U) . n, shapes (..., nc, nc).

    Columns of R belong to u.n - c, u.n, (shear,) u.n + c. Dry or
    temperature-free states fall back to the identity.
    """
    U = np.asarray(U, dtype=float)
    nc = U.shape[-1]
    dim = nc - 2
    n = np.broadcast_to(np.asarray(n, dtype=float), U.shape[:-1] + (dim,))
    vel = velocities(U, dry_tol)
    theta = temperature(U, dry_tol)
    c = sound_speed(U, g, dry_tol)

    R = np.zeros(U.shape[:-1] + (nc, nc))
    R[..., 0, 0] = 1.0
    R[..., 0, 1] = 1.0
    R[..., 0, -1] = 1.0
    R[..., 1:-1, 0] = vel - c[..., None] * n
    R[..., 1:-1, 1] = vel
    R[..., 1:-1, -1] = vel + c[..., None] * n
    R[..., -1, 0] = theta
    R[..., -1, 1] = -theta
    R[..., -1, -1] = theta
    if dim == 2:
        R[..., 1, 2] = -n[..., 1]
        R[..., 2, 2] = n[..., 0]

    degenerate = (c < 1e-10) | (theta < 1e-10)
    eye = np.broadcast_to(np.eye(nc), R.shape)
    R = np.where(degenerate[..., None, None], eye, R)
    L = np.linalg.inv(R)
    return R, L


# -- semi-discrete residual ------------------------------------------------

def physical_gradients(mesh: Mesh, basis: ReferenceBasis) -> np.ndarray:
    """Physical basis gradients at element quadrature points (N, nq, nb, dim)."""
    return np.einsum("qjd,ndi->nqji", basis.dphi, mesh.inverse_jacobian)


def edge_traces(field: DGField) -> Tuple[np.ndarray, np.ndarray]:
    """Left and right traces (Ne, ne, nc) at edge quadrature points.

    Right traces on physical boundaries are copies of the left ones.
    """
    topo = field.mesh.topology
    basis = field.basis
    left, right = topo.edge_elements[:, 0], topo.edge_elements[:, 1]
    phi_l = basis.face_phi[topo.edge_tables[:, 0]]
    trace_l = np.einsum("epj,ejc->epc", phi_l, field.coeffs[left])
    interior = right >= 0
    trace_r = trace_l.copy()
    if np.any(interior):
        phi_r = basis.face_phi[topo.edge_tables[interior, 1]]
        trace_r[interior] = np.einsum("epj,ejc->epc", phi_r, field.coeffs[right[interior]])
    return trace_l, trace_r


def edge_fluxes(
    state: DGField,
    bottom: DGField,
    g: float = DEFAULT_GRAVITY,
    dry_tol: float = DEFAULT_DRY_TOL,
) -> Tuple[np.ndarray, np.ndarray]:
    """Outward well-balanced fluxes (Ne, ne, nc) seen by the left and right element of every edge."""
    mesh = state.mesh
    topo = mesh.topology
    U_l, U_r = edge_traces(state)
    b_l, b_r = edge_traces(bottom)
    b_l, b_r = b_l[..., 0], b_r[..., 0]
    n = np.broadcast_to(mesh.edge_normals[:, None, :], U_l.shape[:-1] + (mesh.dim,))

    boundary = topo.edge_elements[:, 1] < 0
    if np.any(boundary):
        kinds = topo.edge_kinds[boundary][:, None]
        U_r[boundary] = ghost_state(U_l[boundary], n[boundary], kinds)
        b_r[boundary] = b_l[boundary]

    alpha = np.maximum(max_wave_speed(U_l, n, g, dry_tol), max_wave_speed(U_r, n, g, dry_tol))
    star_l, star_r = hydrostatic_reconstruct(U_l, U_r, b_l, b_r, dry_tol)
    shared = lax_friedrichs(star_l, star_r, n, alpha, g, dry_tol)
    flux_l = shared + normal_flux(U_l, n, g, dry_tol) - normal_flux(star_l, n, g, dry_tol)
    flux_r = -shared - normal_flux(U_r, n, g, dry_tol) + normal_flux(star_r, n, g, dry_tol)
    return flux_l, flux_r


def residual(
    state: DGField,
    bottom: DGField,
    g: float = DEFAULT_GRAVITY,
    dry_tol: float = DEFAULT_DRY_TOL,
) -> np.ndarray:
    """Modal residual (N, nb, nc): volume source + flux terms minus edge fluxes.

    The time derivative of the coefficients is the residual divided by the
    element Jacobian determinant.
    """
    mesh = state.mesh
    basis = state.basis
    topo = mesh.topology
    det = mesh.jacobian_det

    Uq = state.quadrature_values()                                # (N, nq, nc)
    grad_phi = physical_gradients(mesh, basis)                    # (N, nq, nb, d)
    grad_b = np.einsum("nqji,nj->nqi", grad_phi, bottom.coeffs[:, :, 0])
    F = _flux(Uq, g, dry_tol)                                     # (N, nq, nc, d)
    S = source(Uq, grad_b, g)

    wdet = basis.quad_weights[None, :] * det[:, None]             # (N, nq)
    R = np.einsum("nq,nqci,nqji->njc", wdet, F, grad_phi)
    R += np.einsum("nq,nqc,qj->njc", wdet, S, basis.phi)

    flux_l, flux_r = edge_fluxes(state, bottom, g, dry_tol)
    weights = basis.edge_weights[None, :] * mesh.edge_lengths[:, None]    # (Ne, ne)
    left, right = topo.edge_elements[:, 0], topo.edge_elements[:, 1]
    contrib_l = np.einsum("ep,epc,epj->ejc", weights, flux_l, basis.face_phi[topo.edge_tables[:, 0]])
    np.subtract.at(R, left, contrib_l)
    interior = right >= 0
    contrib_r = np.einsum(
        "ep,epc,epj->ejc",
        weights[interior],
        flux_r[interior],
        basis.face_phi[topo.edge_tables[interior, 1]],
    )
    np.subtract.at(R, right[interior], contrib_r)

    bad = ~np.isfinite(R)
    if bad.any():
        element = int(np.argwhere(bad)[0, 0])
        edges = topo.element_edges[element]
        bad_edges = [int(e) for e in edges if not np.all(np.isfinite(flux_l[e]))]
        logger.error("non-finite residual", element=element, edges=bad_edges)
        raise NonFiniteError(
            f"non-finite residual in element {element}",
            element=element,
            edge=bad_edges[0] if bad_edges else None,
        )
    return R


def time_derivative(
    state: DGField,
    bottom: DGField,
    g: float = DEFAULT_GRAVITY,
    dry_tol: float = DEFAULT_DRY_TOL,
) -> np.ndarray:
    """Coefficient rates dc/dt (mass matrix is det(J) times identity)."""
    return residual(state, bottom, g, dry_tol) / state.mesh.jacobian_det[:, None, None]
