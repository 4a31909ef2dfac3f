"""Conservative DG interpolation between two meshes with the same connectivity.

The field is transported through the linearly blended mesh
``x(s) = (1 - s) x_old + s x_new`` by integrating

    d/ds int_K q phi = int_K f . grad(phi) - sum_e int_e f_hat phi,   f = -q Xdot,

with a local Lax-Friedrichs flux and SSP-RK3 in ``s``. The unknowns are
``det(J) * coeffs``; fluxes use the blended geometry of every stage.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..domain.dg import DGField, ReferenceBasis
from ..domain.mesh import Mesh, MeshBlend, barycentric, min_element_height
from ..exceptions import MeshTanglingError
from ..utils.logging import LogCategory, create_logger
from .limiters import scale_to_nonnegative

logger = create_logger(__name__, LogCategory.REMAP)

DEFAULT_REMAP_CFL = 0.18


@dataclass(frozen=True)
class RemapPlan:
    """Pseudo-time discretization of one mesh blend."""

    blend: MeshBlend
    dvarsigma: float
    n_steps: int
    remap_cfl: float
    max_normal_speed: float = 0.0
    identity: bool = False

    def intervals(self) -> List[Tuple[float, float]]:
        """(start, length) of every sub-step; the last one lands on s = 1."""
        out = []
        start = 0.0
        for i in range(self.n_steps):
            length = min(self.dvarsigma, 1.0 - start) if i < self.n_steps - 1 else 1.0 - start
            out.append((start, length))
            start += length
        return out


def _edge_velocities(blend: MeshBlend, basis: ReferenceBasis) -> np.ndarray:
    """Mesh velocity (Ne, ne, dim) at edge quadrature points, seen from the left element."""
    topo = blend.topology
    left = topo.edge_elements[:, 0]
    ref = basis.face_ref_points[topo.edge_tables[:, 0]]                  # (Ne, ne, dim)
    lam = barycentric(topo.dim, ref.reshape(-1, topo.dim)).reshape(ref.shape[0], ref.shape[1], -1)
    disp = blend.displacement[topo.elements[left]]                       # (Ne, nv, dim)
    return np.einsum("epi,eid->epd", lam, disp)


def _element_velocities(blend: MeshBlend, basis: ReferenceBasis) -> np.ndarray:
    """Mesh velocity (N, nq, dim) at element quadrature points."""
    lam = barycentric(blend.topology.dim, basis.quad_points)
    return np.einsum("qi,nid->nqd", lam, blend.displacement[blend.topology.elements])


def plan_remap(blend: MeshBlend, basis: ReferenceBasis, remap_cfl: float = DEFAULT_REMAP_CFL) -> RemapPlan:
    """Pseudo-time step C_p * min(a_min_old, a_min_new) / max |Xdot . n|, at most 1.

    Xdot is constant along the blend while edge normals turn, so the speed
    is taken as max |Xdot| over edge quadrature points, which bounds
    |Xdot . n| at every blend state (and equals it on segments).
    """
    if blend.is_identity:
        return RemapPlan(blend=blend, dvarsigma=1.0, n_steps=1, remap_cfl=remap_cfl, identity=True)
    old = blend.mesh_at(0.0)
    new = blend.mesh_at(1.0)
    speed = float(np.linalg.norm(_edge_velocities(blend, basis), axis=-1).max(initial=0.0))
    if speed <= 0.0:
        return RemapPlan(blend=blend, dvarsigma=1.0, n_steps=1, remap_cfl=remap_cfl)
    a_min = min(min_element_height(old), min_element_height(new))
    dvarsigma = min(1.0, remap_cfl * a_min / speed)
    n_steps = max(1, math.ceil(1.0 / dvarsigma - 1e-12))
    return RemapPlan(
        blend=blend,
        dvarsigma=dvarsigma,
        n_steps=n_steps,
        remap_cfl=remap_cfl,
        max_normal_speed=speed,
    )


class _Transport:
    """Right-hand side of the pseudo-time transport on the blended mesh."""

    def __init__(self, plan: RemapPlan, basis: ReferenceBasis):
        self.plan = plan
        self.basis = basis
        topo = plan.blend.topology
        self.topology = topo
        self.xdot_q = _element_velocities(plan.blend, basis)
        self.xdot_e = _edge_velocities(plan.blend, basis)
        self.left = topo.edge_elements[:, 0]
        self.right = topo.edge_elements[:, 1]
        self.interior = self.right >= 0
        self.phi_l = basis.face_phi[topo.edge_tables[:, 0]]
        self.phi_r = basis.face_phi[topo.edge_tables[self.interior, 1]]

    def rhs(self, coeffs: np.ndarray, mesh: Mesh) -> np.ndarray:
        """d(det * coeffs)/ds on the geometry of ``mesh``."""
        basis = self.basis
        q = np.einsum("qj,njc->nqc", basis.phi, coeffs)
        grad_phi = np.einsum("qjd,ndi->nqji", basis.dphi, mesh.inverse_jacobian)
        wdet = basis.quad_weights[None, :] * mesh.jacobian_det[:, None]
        R = -np.einsum("nq,nqc,nqi,nqji->njc", wdet, q, self.xdot_q, grad_phi)

        q_l = np.einsum("epj,ejc->epc", self.phi_l, coeffs[self.left])
        q_r = q_l.copy()
        q_r[self.interior] = np.einsum("epj,ejc->epc", self.phi_r, coeffs[self.right[self.interior]])
        s = np.einsum("epd,ed->ep", self.xdot_e, mesh.edge_normals)[..., None]
        flux = 0.5 * (-(q_l + q_r) * s - np.abs(s) * (q_r - q_l))
        weights = basis.edge_weights[None, :] * mesh.edge_lengths[:, None]
        np.subtract.at(R, self.left, np.einsum("ep,epc,epj->ejc", weights, flux, self.phi_l))
        np.add.at(
            R,
            self.right[self.interior],
            np.einsum("ep,epc,epj->ejc", weights[self.interior], flux[self.interior], self.phi_r),
        )
        return R


def _positivity(coeffs: np.ndarray, basis: ReferenceBasis, pp_mask: np.ndarray) -> np.ndarray:
    if not np.any(pp_mask):
        return coeffs
    out = coeffs.copy()
    for c in np.flatnonzero(pp_mask):
        out[:, :, c], _ = scale_to_nonnegative(coeffs[:, :, c], basis)
    return out


def interpolate_coefficients(
    coeffs: np.ndarray,
    plan: RemapPlan,
    basis: ReferenceBasis,
    pp_mask: Optional[Sequence[bool]] = None,
) -> np.ndarray:
    """Transport coefficients (N, nb, nc) from the old to the new mesh of a plan.

    Element volumes at the Runge-Kutta stages follow the same recurrence as
    the unknowns (driven by the transported unit field), so a constant
    field stays constant to round-off.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if plan.identity:
        return coeffs.copy()
    mask = np.zeros(coeffs.shape[2], dtype=bool) if pp_mask is None else np.asarray(pp_mask, dtype=bool)
    transport = _Transport(plan, basis)
    blend = plan.blend
    intervals = plan.intervals()
    unit = np.zeros(coeffs.shape[:2] + (1,))
    unit[:, 0, 0] = 1.0 / basis.phi0

    def stage(c: np.ndarray, mesh: Mesh) -> Tuple[np.ndarray, np.ndarray]:
        r = transport.rhs(np.concatenate([c, unit], axis=2), mesh)
        return r[:, :, :-1], r[:, 0, -1] * basis.phi0

    def divide(W: np.ndarray, D: np.ndarray, varsigma: float) -> np.ndarray:
        bad = np.flatnonzero(~(D > 0.0))
        if bad.size:
            raise MeshTanglingError(
                f"stage volume of element {int(bad[0])} collapsed at varsigma={varsigma:.6g}",
                element=int(bad[0]),
                varsigma=varsigma,
            )
        return _positivity(W / D[:, None, None], basis, mask)

    mesh0 = blend.mesh_at(0.0)
    c = coeffs.copy()
    for i, (start, length) in enumerate(intervals):
        end = 1.0 if i == len(intervals) - 1 else start + length
        mesh_end = blend.mesh_at(end)
        mesh_mid = blend.mesh_at(start + 0.5 * length)
        D0 = mesh0.jacobian_det

        r0, g0 = stage(c, mesh0)
        D1 = D0 + length * g0
        c1 = divide(D0[:, None, None] * c + length * r0, D1, end)

        r1, g1 = stage(c1, mesh_end)
        D2 = 0.75 * D0 + 0.25 * (D1 + length * g1)
        W2 = 0.75 * D0[:, None, None] * c + 0.25 * (D1[:, None, None] * c1 + length * r1)
        c2 = divide(W2, D2, start + 0.5 * length)

        r2, g2 = stage(c2, mesh_mid)
        D3 = D0 / 3.0 + 2.0 / 3.0 * (D2 + length * g2)
        W3 = D0[:, None, None] * c / 3.0 + 2.0 / 3.0 * (D2[:, None, None] * c2 + length * r2)
        c = divide(W3, D3, end)
        mesh0 = mesh_end
    return c


def dg_interpolate(field: DGField, plan: RemapPlan, use_pp: bool = False, new_mesh: Optional[Mesh] = None) -> DGField:
    """Conservative transfer of a field onto the new mesh of the plan."""
    mesh = new_mesh if new_mesh is not None else plan.blend.mesh_at(1.0)
    coeffs = interpolate_coefficients(field.coeffs, plan, field.basis, [use_pp] * field.n_comp)
    return DGField(mesh, field.basis, coeffs)


def remap_state(
    state: DGField,
    bottom: DGField,
    plan: RemapPlan,
    new_mesh: Optional[Mesh] = None,
) -> Tuple[DGField, DGField]:
    """Move (state, bottom) onto the new mesh.

    Depth and eta are transported with the positivity limiter, momenta
    without; the new bottom is the transported free surface minus the
    transported depth, so lake-at-rest surfaces stay flat.
    """
    mesh = new_mesh if new_mesh is not None else plan.blend.mesh_at(1.0)
    if plan.identity:
        return DGField(mesh, state.basis, state.coeffs.copy()), DGField(mesh, bottom.basis, bottom.coeffs.copy())
    nc = state.n_comp
    stacked = np.concatenate([state.coeffs, state.coeffs[:, :, :1] + bottom.coeffs], axis=2)
    pp_mask = np.zeros(nc + 1, dtype=bool)
    pp_mask[0] = True
    pp_mask[nc - 1] = True
    moved = interpolate_coefficients(stacked, plan, state.basis, pp_mask)
    new_state = DGField(mesh, state.basis, moved[:, :, :nc])
    new_bottom = DGField(mesh, bottom.basis, moved[:, :, nc:] - moved[:, :, :1])
    logger.debug("state remapped", substeps=plan.n_steps, dvarsigma=plan.dvarsigma)
    return new_state, new_bottom
