"""Post-stage limiting: characteristic TVB, positivity scaling, bottom correction, dry fix.

The TVB limiter works on the surface-balanced variables
``(h + b, hu[, hv], eta + (b theta))`` so a lake at rest is left untouched;
in dry mode troubled cells are flagged from ``h + b`` and the plain
conserved variables are limited there.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ..domain.dg import DGField, ReferenceBasis
from ..domain.mesh import EDGE_REFLECTIVE, REFERENCE_TRIANGLE, Mesh, barycentric
from ..domain.problem import LimiterConfig
from ..exceptions import PositivityError
from ..utils.logging import LogCategory, MetricsCollector, create_logger
from .ripa_model import DEFAULT_GRAVITY, eigenvectors

logger = create_logger(__name__, LogCategory.LIMITER)

ROUNDOFF_FLOOR = 1e-12
NEGATIVE_AVERAGE_TOL = 1e-12


# -- minmod -----------------------------------------------------------------

def minmod(*args: np.ndarray) -> np.ndarray:
    """Element-wise minmod of any number of arrays."""
    stack = np.stack(np.broadcast_arrays(*args))
    s = np.sign(stack[0])
    agree = np.all(np.sign(stack) == s, axis=0)
    return np.where(agree, s * np.abs(stack).min(axis=0), 0.0)


def tvb_minmod(a1, a2, a3, m_tvb: float, dx, floor=0.0) -> np.ndarray:
    """TVB-modified minmod: a1 itself when |a1| <= M dx^2 (+ round-off floor)."""
    a1 = np.asarray(a1, dtype=float)
    keep = np.abs(a1) <= m_tvb * np.asarray(dx) ** 2 + floor
    return np.where(keep, a1, minmod(a1, a2, a3))


# -- helpers ------------------------------------------------------------------

def reconstruct_btheta(h: DGField, eta: DGField, b: DGField, dry_tol: float = 1e-6) -> DGField:
    """Per-element (eta_bar / h_bar) * b; zero ratio where h_bar < dry_tol."""
    h_bar = h.cell_averages()[:, 0]
    eta_bar = eta.cell_averages()[:, 0]
    wet = h_bar >= dry_tol
    ratio = np.where(wet, eta_bar / np.where(wet, h_bar, 1.0), 0.0)
    return b.with_coeffs(b.coeffs * ratio[:, None, None])


def _ghost_average(avg: np.ndarray, normal: np.ndarray, kind: np.ndarray) -> np.ndarray:
    """Cell average seen across a physical boundary face."""
    ghost = avg.copy()
    if ghost.shape[-1] < 3:
        return ghost
    mom = ghost[..., 1:-1]
    mn = np.einsum("...i,...i->...", mom, normal)
    wall = kind == EDGE_REFLECTIVE
    ghost[..., 1:-1] = np.where(wall[..., None], mom - 2.0 * mn[..., None] * normal, mom)
    return ghost


def _neighbor_averages(mesh: Mesh, avg: np.ndarray) -> np.ndarray:
    """Neighbor cell averages per face (N, n_faces, nc), ghosts on physical boundaries."""
    nbr = mesh.neighbors
    out = avg[np.maximum(nbr, 0)]
    boundary = nbr < 0
    if np.any(boundary):
        elems, faces = np.nonzero(boundary)
        out[elems, faces] = _ghost_average(
            avg[elems], mesh.face_normals[elems, faces], mesh.face_kinds[elems, faces]
        )
    return out


def _balanced_variables(state: DGField, bottom: DGField, dry_tol: float) -> Tuple[np.ndarray, np.ndarray]:
    """Coefficients of (h + b, momenta, eta + (b theta)) and the (b theta) coefficients."""
    h = state.component(0)
    eta = state.component(state.n_comp - 1)
    btheta = reconstruct_btheta(h, eta, bottom, dry_tol).coeffs[:, :, 0]
    V = state.coeffs.copy()
    V[:, :, 0] += bottom.coeffs[:, :, 0]
    V[:, :, -1] += btheta
    return V, btheta


# -- 1D ---------------------------------------------------------------------

def _limit_segments(
    V: np.ndarray,
    U_bar: np.ndarray,
    mesh: Mesh,
    basis: ReferenceBasis,
    cfg: LimiterConfig,
    g: float,
    candidates: np.ndarray,
    characteristic: bool = True,
) -> Tuple[np.ndarray, np.ndarray]:
    """Characteristic TVB limiting on segments; returns (coeffs, troubled mask)."""
    V_bar = V[:, 0, :] * basis.phi0
    nbr_avg = _neighbor_averages(mesh, V_bar)               # face 0 = left, face 1 = right
    right_val = np.einsum("j,njc->nc", basis.face_phi[1][0], V)
    left_val = np.einsum("j,njc->nc", basis.face_phi[0][0], V)

    if characteristic:
        R, L = eigenvectors(U_bar, np.ones((mesh.n_elements, 1)), g, cfg.dry_tol)
    else:
        nc = V.shape[2]
        R = L = np.broadcast_to(np.eye(nc), (mesh.n_elements, nc, nc))
    to_char = lambda a: np.einsum("nij,nj->ni", L, a)     # noqa: E731
    w_bar = to_char(V_bar)
    dev_r = to_char(right_val - V_bar)
    dev_l = to_char(V_bar - left_val)
    fwd = to_char(nbr_avg[:, 1] - V_bar)
    bwd = to_char(V_bar - nbr_avg[:, 0])

    dx = mesh.heights[:, None]
    floor = ROUNDOFF_FLOOR * (1.0 + np.abs(w_bar))
    mod_r = tvb_minmod(dev_r, fwd, bwd, cfg.m_tvb, dx, floor)
    mod_l = tvb_minmod(dev_l, fwd, bwd, cfg.m_tvb, dx, floor)
    troubled_comp = ((mod_r != dev_r) | (mod_l != dev_l)) & candidates[:, None]
    troubled = troubled_comp.any(axis=1)
    if not np.any(troubled):
        return V, troubled

    out = V.copy()
    idx = np.flatnonzero(troubled)
    W = np.einsum("nij,nmj->nmi", L[idx], V[idx])            # (t, nb, nc) in characteristic space
    root3 = np.sqrt(3.0)
    slope = minmod(W[:, 1, :] * root3, fwd[idx], bwd[idx]) / root3
    mask = troubled_comp[idx]
    W[:, 1, :] = np.where(mask, slope, W[:, 1, :])
    W[:, 2:, :] = np.where(mask[:, None, :], 0.0, W[:, 2:, :])
    out[idx, 1:, :] = np.einsum("nij,nmj->nmi", R[idx], W[:, 1:, :])
    return out, troubled


# -- 2D ---------------------------------------------------------------------

@dataclass
class _TriangleStencil:
    """Cockburn-Shu midpoint stencil of every triangle."""

    alpha: np.ndarray        # (N, 3, 2) weights of the neighbor pair per face
    pair: np.ndarray         # (N, 3, 2) face ids of the neighbor pair
    dx: np.ndarray           # (N, 3) centroid to face-midpoint distance
    normals: np.ndarray      # (N, 3, 2) outward face normals


def _triangle_stencil(mesh: Mesh) -> _TriangleStencil:
    verts = mesh.vertices[mesh.elements]                                  # (N, 3, 2)
    mids = np.stack([0.5 * (verts[:, (f + 1) % 3] + verts[:, (f + 2) % 3]) for f in range(3)], axis=1)
    b0 = mesh.centroids[:, None, :]
    nbr = mesh.neighbors
    centers = mesh.centroids[np.maximum(nbr, 0)] + mesh.neighbor_shifts
    normals = mesh.face_normals
    mirrored = b0 + 2.0 * np.einsum("nfi,nfi->nf", mids - b0, normals)[..., None] * normals
    centers = np.where((nbr < 0)[..., None], mirrored, centers)

    d = centers - b0                                                      # (N, 3, 2)
    target = mids - b0
    n_el = mesh.n_elements
    alpha = np.zeros((n_el, 3, 2))
    pair = np.zeros((n_el, 3, 2), dtype=int)
    for f in range(3):
        chosen = np.zeros(n_el, dtype=bool)
        for other in ((f + 1) % 3, (f + 2) % 3):
            a, b = d[:, f], d[:, other]
            det = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
            safe = np.where(np.abs(det) > 1e-300, det, 1.0)
            t = target[:, f]
            a1 = (t[:, 0] * b[:, 1] - t[:, 1] * b[:, 0]) / safe
            a2 = (a[:, 0] * t[:, 1] - a[:, 1] * t[:, 0]) / safe
            ok = ~chosen & (np.abs(det) > 1e-300) & (a1 >= -1e-12) & (a2 >= -1e-12)
            alpha[ok, f] = np.stack([a1[ok], a2[ok]], axis=1)
            pair[ok, f] = (f, other)
            chosen |= ok
        if not np.all(chosen):
            rest = ~chosen
            a = d[rest, f]
            alpha[rest, f, 0] = np.einsum("ni,ni->n", target[rest, f], a) / np.einsum("ni,ni->n", a, a)
            pair[rest, f] = (f, f)
    dx = np.linalg.norm(target, axis=2)
    return _TriangleStencil(alpha=alpha, pair=pair, dx=dx, normals=normals)


def _midpoint_tables(basis: ReferenceBasis) -> Tuple[np.ndarray, np.ndarray]:
    """Basis values at face midpoints (3, nb) and modal coefficients of the P1 midpoint functions (3, nb)."""
    mids = np.array([0.5 * (REFERENCE_TRIANGLE[(f + 1) % 3] + REFERENCE_TRIANGLE[(f + 2) % 3]) for f in range(3)])
    lam = barycentric(2, basis.quad_points)
    psi = 1.0 - 2.0 * lam                                                # (nq, 3)
    psi_coeffs = np.einsum("q,qi,qj->ij", basis.quad_weights, psi, basis.phi)
    return basis.evaluate_basis(mids), psi_coeffs


def _limit_triangles(
    V: np.ndarray,
    U_bar: np.ndarray,
    mesh: Mesh,
    basis: ReferenceBasis,
    cfg: LimiterConfig,
    g: float,
    candidates: np.ndarray,
    characteristic: bool = True,
) -> Tuple[np.ndarray, np.ndarray]:
    stencil = _triangle_stencil(mesh)
    phi_mid, psi_coeffs = _midpoint_tables(basis)
    V_bar = V[:, 0, :] * basis.phi0
    nbr_avg = _neighbor_averages(mesh, V_bar)                            # (N, 3, nc)
    rows = np.arange(mesh.n_elements)[:, None]
    diff_a = nbr_avg[rows, stencil.pair[:, :, 0]] - V_bar[:, None, :]
    diff_b = nbr_avg[rows, stencil.pair[:, :, 1]] - V_bar[:, None, :]
    same = (stencil.pair[:, :, 0] == stencil.pair[:, :, 1])[..., None]
    delta = stencil.alpha[..., 0:1] * diff_a + np.where(same, 0.0, stencil.alpha[..., 1:2] * diff_b)
    dev = np.einsum("fj,njc->nfc", phi_mid, V) - V_bar[:, None, :]

    if characteristic:
        U_faces = np.broadcast_to(U_bar[:, None, :], (mesh.n_elements, 3, U_bar.shape[1]))
        R, L = eigenvectors(U_faces, stencil.normals, g, cfg.dry_tol)    # (N, 3, nc, nc)
    else:
        nc = V.shape[2]
        R = L = np.broadcast_to(np.eye(nc), (mesh.n_elements, 3, nc, nc))
    w_dev = np.einsum("nfij,nfj->nfi", L, dev)
    w_del = np.einsum("nfij,nfj->nfi", L, delta)
    floor = ROUNDOFF_FLOOR * (1.0 + np.abs(np.einsum("nfij,nj->nfi", L, V_bar)))
    w_lim = tvb_minmod(w_dev, cfg.nu * w_del, cfg.nu * w_del, cfg.m_tvb, stencil.dx[..., None], floor)
    troubled = np.any(w_lim != w_dev, axis=(1, 2)) & candidates
    if not np.any(troubled):
        return V, troubled

    idx = np.flatnonzero(troubled)
    lim = np.einsum("nfij,nfj->nfi", R[idx], w_lim[idx])                 # (t, 3, nc)
    pos = np.maximum(lim, 0.0).sum(axis=1)
    neg = np.maximum(-lim, 0.0).sum(axis=1)
    balanced = np.abs(lim.sum(axis=1)) <= ROUNDOFF_FLOOR * (pos + neg + 1e-300)
    theta_pos = np.where(pos > 0.0, np.minimum(1.0, neg / np.where(pos > 0.0, pos, 1.0)), 0.0)
    theta_neg = np.where(neg > 0.0, np.minimum(1.0, pos / np.where(neg > 0.0, neg, 1.0)), 0.0)
    redistributed = theta_pos[:, None, :] * np.maximum(lim, 0.0) - theta_neg[:, None, :] * np.maximum(-lim, 0.0)
    lim = np.where(balanced[:, None, :], lim, redistributed)

    out = V.copy()
    out[idx, 1:, :] = 0.0
    out[idx] += np.einsum("fj,nfc->njc", psi_coeffs, lim)
    out[idx, 0, :] = V[idx, 0, :]
    return out, troubled


# -- public limiter operations ---------------------------------------------------

def _apply_tvb(
    state: DGField,
    bottom: DGField,
    cfg: LimiterConfig,
    g: float,
) -> Tuple[DGField, np.ndarray]:
    mesh = state.mesh
    basis = state.basis
    U_bar = state.cell_averages()
    everywhere = np.ones(mesh.n_elements, dtype=bool)
    limit = _limit_segments if mesh.dim == 1 else _limit_triangles

    if not cfg.dry_mode:
        V, btheta = _balanced_variables(state, bottom, cfg.dry_tol)
        limited, troubled = limit(V, U_bar, mesh, basis, cfg, g, everywhere)
        if not np.any(troubled):
            return state, troubled
        coeffs = state.coeffs.copy()
        coeffs[troubled] = limited[troubled]
        coeffs[troubled, :, 0] -= bottom.coeffs[troubled, :, 0]
        coeffs[troubled, :, -1] -= btheta[troubled]
        return state.with_coeffs(coeffs), troubled

    # dry mode: detect on the free surface, limit plain conserved variables
    surface = state.coeffs[:, :, :1] + bottom.coeffs
    _, troubled = limit(surface, U_bar, mesh, basis, cfg, g, everywhere, characteristic=False)
    if not np.any(troubled):
        return state, troubled
    limited, _ = limit(state.coeffs, U_bar, mesh, basis, cfg, g, troubled)
    coeffs = state.coeffs.copy()
    coeffs[troubled] = limited[troubled]
    return state.with_coeffs(coeffs), troubled


def tvb_limit(
    state: DGField,
    bottom: DGField,
    cfg: Optional[LimiterConfig] = None,
    g: float = DEFAULT_GRAVITY,
) -> DGField:
    """Characteristic TVB limiter; cell averages are preserved."""
    cfg = cfg or LimiterConfig()
    limited, _ = _apply_tvb(state, bottom, cfg, g)
    return limited


def scale_to_nonnegative(coeffs: np.ndarray, basis: ReferenceBasis) -> Tuple[np.ndarray, np.ndarray]:
    """Linear scaling toward the cell average so values at the positivity points are >= 0.

    ``coeffs`` is (N, nb); returns the scaled coefficients and lambda per element.
    """
    avg = coeffs[:, 0] * basis.phi0
    bad = avg < -NEGATIVE_AVERAGE_TOL
    if np.any(bad):
        element = int(np.flatnonzero(bad)[0])
        raise PositivityError(element=element, average=float(avg[element]))
    minimum = (basis.pp_phi @ coeffs.T).min(axis=0)
    lam = np.ones_like(avg)
    squeeze = minimum < 0.0
    gap = avg - minimum
    lam[squeeze] = np.minimum(1.0, np.maximum(avg[squeeze], 0.0) / gap[squeeze])
    out = coeffs.copy()
    out[:, 1:] *= lam[:, None]
    # round-off negative averages collapse to zero
    out[avg < 0.0] = 0.0
    return out, lam


def pp_limit(h: DGField, eta: DGField, basis: Optional[ReferenceBasis] = None):
    """Positivity limiter on depth and eta; returns (h_hat, eta_hat, lambda_h, lambda_eta)."""
    basis = basis or h.basis
    h_coeffs, lam_h = scale_to_nonnegative(h.coeffs[:, :, 0], basis)
    eta_coeffs, lam_eta = scale_to_nonnegative(eta.coeffs[:, :, 0], basis)
    return h.with_coeffs(h_coeffs), eta.with_coeffs(eta_coeffs), lam_h, lam_eta


def bottom_correction(b: DGField, h_before: DGField, h_after: DGField) -> DGField:
    """b_hat = b - (h_hat - h): keeps h + b unchanged through the positivity step."""
    return b.with_coeffs(b.coeffs - (h_after.coeffs - h_before.coeffs))


def dry_fix(state: DGField, cfg: Optional[LimiterConfig] = None) -> DGField:
    """Zero every momentum mode on elements whose mean depth is below dry_tol."""
    dry_tol = (cfg or LimiterConfig()).dry_tol
    dry = state.cell_averages()[:, 0] < dry_tol
    if not np.any(dry):
        return state
    coeffs = state.coeffs.copy()
    coeffs[dry, :, 1:-1] = 0.0
    return state.with_coeffs(coeffs)


@dataclass
class StageLimiter:
    """Limiter sequence applied after every Runge-Kutta stage: TVB, PP + bottom correction, dry fix."""

    config: LimiterConfig = field(default_factory=LimiterConfig)
    gravity: float = DEFAULT_GRAVITY
    metrics: Optional[MetricsCollector] = None

    def __call__(self, state: DGField, bottom: DGField) -> Tuple[DGField, DGField]:
        cfg = self.config
        if cfg.tvb_enabled:
            state, troubled = _apply_tvb(state, bottom, cfg, self.gravity)
            self._count("tvb_troubled_cells", int(np.count_nonzero(troubled)))
        if cfg.pp_enabled:
            h = state.component(0)
            eta = state.component(state.n_comp - 1)
            h_hat, eta_hat, lam_h, lam_eta = pp_limit(h, eta, state.basis)
            active = int(np.count_nonzero(lam_h < 1.0) + np.count_nonzero(lam_eta < 1.0))
            if active:
                coeffs = state.coeffs.copy()
                coeffs[:, :, 0] = h_hat.coeffs[:, :, 0]
                coeffs[:, :, -1] = eta_hat.coeffs[:, :, 0]
                bottom = bottom_correction(bottom, h, h_hat)
                state = state.with_coeffs(coeffs)
                self._count("pp_activations", active)
                logger.debug("positivity limiter active", elements=active)
        state = dry_fix(state, cfg)
        if self.metrics is not None:
            pp_vals = state.pp_values()
            self.metrics.record_minimum("min_depth_pp", float(pp_vals[:, :, 0].min()))
            self.metrics.record_minimum("min_eta_pp", float(pp_vals[:, :, -1].min()))
        return state, bottom

    def _count(self, name: str, value: int) -> None:
        if self.metrics is not None and value:
            self.metrics.increment_counter(name, value)
