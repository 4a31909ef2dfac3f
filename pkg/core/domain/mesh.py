"""Mesh entities: 1D segment and 2D triangle meshes with fixed connectivity.

Connectivity (the :class:`MeshTopology`) never changes during a run; moving
the mesh produces a new :class:`Mesh` that shares the topology and carries
fresh geometric caches. 1D meshes reuse the same abstraction with point
"edges" and normals of +-1.

Conventions
-----------
* Reference interval is [0, 1]; reference triangle has vertices
  (0, 0), (1, 0), (0, 1). Maps are affine: ``x = x_0 + J xi``.
* 2D elements are counter-clockwise. Face ``f`` is opposite local vertex
  ``f`` and runs from local vertex ``(f+1) % 3`` to ``(f+2) % 3``.
* Every edge has a left (lower-indexed) element; the edge normal points out
  of the left element. Edge quadrature runs from the left element's first
  face vertex to its second; the right element sees the same physical points
  in reversed local order (face table ``2*f + 1``).
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from ..exceptions import MeshError, MeshTanglingError


class BoundaryKind(str, Enum):
    """Boundary condition attached to a side of the domain."""
    PERIODIC = "periodic"
    REFLECTIVE = "reflective"
    OUTFLOW = "outflow"


EDGE_INTERIOR = 0
EDGE_PERIODIC = 1
EDGE_REFLECTIVE = 2
EDGE_OUTFLOW = 3

_KIND_CODES = {
    BoundaryKind.PERIODIC: EDGE_PERIODIC,
    BoundaryKind.REFLECTIVE: EDGE_REFLECTIVE,
    BoundaryKind.OUTFLOW: EDGE_OUTFLOW,
}

SIDES = ("xmin", "xmax", "ymin", "ymax")
_SIDE_AXIS = {"xmin": 0, "xmax": 0, "ymin": 1, "ymax": 1}
_PERIODIC_PAIRS = (("xmax", "xmin"), ("ymax", "ymin"))

REFERENCE_TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])

BoundarySpec = Union[None, str, BoundaryKind, Mapping[str, Union[str, BoundaryKind]]]


def face_vertices(dim: int, face: int) -> Tuple[int, ...]:
    """Local vertex indices of a face, in counter-clockwise traversal order."""
    if dim == 1:
        return (face,)
    return ((face + 1) % 3, (face + 2) % 3)


def face_table(dim: int, face: int, flip: int) -> int:
    """Index of the face point table for a face seen with a given orientation."""
    if dim == 1:
        return face
    return 2 * face + flip


def n_face_tables(dim: int) -> int:
    return 2 if dim == 1 else 6


@dataclass(frozen=True)
class MeshTopology:
    """Coordinate-independent connectivity shared by every mesh of a run."""

    dim: int
    n_vertices: int
    elements: np.ndarray          # (N, dim+1)
    edge_vertices: np.ndarray     # (Ne, 2, dim) vertex ids per side, in quadrature order
    edge_elements: np.ndarray     # (Ne, 2) left, right (-1 on physical boundary)
    edge_faces: np.ndarray        # (Ne, 2) local face ids (-1 on physical boundary)
    edge_tables: np.ndarray       # (Ne, 2) face point table ids (-1 on physical boundary)
    edge_kinds: np.ndarray        # (Ne,) EDGE_* codes
    edge_sides: Tuple[str, ...]   # domain side per edge ("" for interior)
    element_edges: np.ndarray     # (N, n_faces)
    element_sides: np.ndarray     # (N, n_faces) 0 if the element is the edge's left side
    vertex_mobility: np.ndarray   # (Nv, dim) 1 where a coordinate may move

    @property
    def n_elements(self) -> int:
        return int(self.elements.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.edge_elements.shape[0])

    @property
    def n_faces(self) -> int:
        return self.dim + 1

    @property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_elements[:, 1] >= 0)

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_elements[:, 1] < 0)


class Mesh:
    """A mesh: shared topology plus vertex coordinates and geometric caches."""

    def __init__(self, topology: MeshTopology, vertices: np.ndarray, validate: bool = True):
        vertices = np.asarray(vertices, dtype=float).reshape(topology.n_vertices, topology.dim)
        self.topology = topology
        self.vertices = vertices
        self._compute_geometry()
        if validate:
            bad = np.flatnonzero(~(self.jacobian_det > 0.0))
            if bad.size:
                raise MeshError(
                    f"inverted element {int(bad[0])} (non-positive measure)",
                    element=int(bad[0]),
                )

    # -- topology passthrough -------------------------------------------------
    @property
    def dim(self) -> int:
        return self.topology.dim

    @property
    def elements(self) -> np.ndarray:
        return self.topology.elements

    @property
    def n_elements(self) -> int:
        return self.topology.n_elements

    @property
    def n_vertices(self) -> int:
        return self.topology.n_vertices

    @property
    def n_edges(self) -> int:
        return self.topology.n_edges

    @property
    def n_faces(self) -> int:
        return self.topology.n_faces

    # -- geometry -------------------------------------------------------------
    def _compute_geometry(self) -> None:
        topo = self.topology
        x = self.vertices[topo.elements]  # (N, nv, d)
        dim = topo.dim

        if dim == 1:
            jac = (x[:, 1, 0] - x[:, 0, 0]).reshape(-1, 1, 1)
            det = jac[:, 0, 0].copy()
            heights = np.abs(det)
            safe = np.where(det != 0.0, det, 1.0)
            inv = (1.0 / safe).reshape(-1, 1, 1)
        else:
            jac = np.empty((topo.n_elements, 2, 2))
            jac[:, :, 0] = x[:, 1] - x[:, 0]
            jac[:, :, 1] = x[:, 2] - x[:, 0]
            det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
            lengths = np.stack(
                [np.linalg.norm(x[:, (f + 2) % 3] - x[:, (f + 1) % 3], axis=1) for f in range(3)],
                axis=1,
            )
            heights = np.abs(det) / lengths.max(axis=1)
            safe = np.where(det != 0.0, det, 1.0)
            inv = np.empty_like(jac)
            inv[:, 0, 0] = jac[:, 1, 1] / safe
            inv[:, 0, 1] = -jac[:, 0, 1] / safe
            inv[:, 1, 0] = -jac[:, 1, 0] / safe
            inv[:, 1, 1] = jac[:, 0, 0] / safe
            self.face_lengths = lengths

        self.jacobian = jac
        self.jacobian_det = det
        self.inverse_jacobian = inv
        self.reference_measure = 1.0 if dim == 1 else 0.5
        self.measures = det * self.reference_measure
        self.heights = heights
        self.centroids = x.mean(axis=1)

        ev = topo.edge_vertices
        if dim == 1:
            self.edge_normals = np.where(topo.edge_faces[:, 0] == 1, 1.0, -1.0).reshape(-1, 1)
            self.edge_lengths = np.ones(topo.n_edges)
        else:
            tangent = self.vertices[ev[:, 0, 1]] - self.vertices[ev[:, 0, 0]]
            length = np.linalg.norm(tangent, axis=1)
            self.edge_lengths = length
            self.edge_normals = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1) / length[:, None]
        # translation taking right-side coordinates onto the left side
        self.edge_shifts = self.vertices[ev[:, 0, 0]] - self.vertices[ev[:, 1, 0]]

        n_faces = topo.n_faces
        left = topo.element_sides == 0
        edges = topo.element_edges
        other = np.where(left, topo.edge_elements[edges, 1], topo.edge_elements[edges, 0])
        self.neighbors = other
        sign = np.where(left, 1.0, -1.0)[..., None]
        self.face_normals = sign * self.edge_normals[edges]
        self.neighbor_shifts = sign * self.edge_shifts[edges]
        self.face_kinds = topo.edge_kinds[edges]
        assert self.face_normals.shape == (topo.n_elements, n_faces, dim)

    # -- derived quantities ---------------------------------------------------
    @property
    def total_measure(self) -> float:
        return float(self.measures.sum())

    def with_vertices(self, vertices: np.ndarray, validate: bool = True) -> "Mesh":
        """Same connectivity, new coordinates."""
        return Mesh(self.topology, vertices, validate=validate)

    def outward_normal(self, element: int, face: int) -> np.ndarray:
        return self.face_normals[element, face].copy()

    def to_physical(self, ref_points: np.ndarray) -> np.ndarray:
        """Map reference points (P, dim) to physical points on every element (N, P, dim)."""
        x0 = self.vertices[self.elements[:, 0]]
        return x0[:, None, :] + np.einsum("nij,pj->npi", self.jacobian, np.asarray(ref_points, dtype=float))

    def to_reference(self, element: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Inverse affine map for paired (element, point) arrays."""
        element = np.asarray(element, dtype=int)
        x0 = self.vertices[self.elements[element, 0]]
        return np.einsum("nij,nj->ni", self.inverse_jacobian[element], np.asarray(points) - x0)

    def vertex_patches(self) -> List[np.ndarray]:
        """Elements sharing at least one vertex with each element (itself included)."""
        vertex_elements: List[List[int]] = [[] for _ in range(self.n_vertices)]
        for e, verts in enumerate(self.elements):
            for v in verts:
                vertex_elements[v].append(e)
        return [
            np.unique(np.concatenate([vertex_elements[v] for v in verts]))
            for verts in self.elements
        ]


@dataclass(frozen=True)
class MeshBlend:
    """Linear interpolation between two meshes of identical connectivity."""

    topology: MeshTopology
    coords_old: np.ndarray
    coords_new: np.ndarray

    def __post_init__(self):
        if self.coords_old.shape != self.coords_new.shape:
            raise MeshError("blend endpoints must have the same vertex count")

    @classmethod
    def between(cls, old: Mesh, new: Mesh) -> "MeshBlend":
        if old.topology is not new.topology:
            raise MeshError("blend endpoints must share connectivity")
        return cls(old.topology, old.vertices.copy(), new.vertices.copy())

    @property
    def displacement(self) -> np.ndarray:
        return self.coords_new - self.coords_old

    @property
    def is_identity(self) -> bool:
        return bool(np.all(self.coords_new == self.coords_old))

    def coords(self, varsigma: float) -> np.ndarray:
        if varsigma == 0.0:
            return self.coords_old.copy()
        if varsigma == 1.0:
            return self.coords_new.copy()
        return (1.0 - varsigma) * self.coords_old + varsigma * self.coords_new

    def mesh_at(self, varsigma: float) -> Mesh:
        """Blended mesh; inversion at any element aborts naming varsigma and the element."""
        mesh = Mesh(self.topology, self.coords(varsigma), validate=False)
        bad = np.flatnonzero(~(mesh.jacobian_det > 0.0))
        if bad.size:
            raise MeshTanglingError(
                f"blended element {int(bad[0])} inverted at varsigma={varsigma:.6g}",
                element=int(bad[0]),
                varsigma=float(varsigma),
            )
        return mesh


def blend(mesh_blend: MeshBlend, varsigma: float) -> np.ndarray:
    """Nodal coordinates at pseudo-time varsigma in [0, 1]."""
    if not 0.0 <= varsigma <= 1.0:
        raise ValueError(f"varsigma must lie in [0, 1], got {varsigma}")
    return mesh_blend.coords(varsigma)


def barycentric(dim: int, ref_points: np.ndarray) -> np.ndarray:
    """Barycentric coordinates (P, dim+1) of reference points (P, dim)."""
    ref_points = np.atleast_2d(np.asarray(ref_points, dtype=float))
    return np.concatenate([1.0 - ref_points.sum(axis=1, keepdims=True), ref_points], axis=1)


def mesh_velocity(mesh_blend: MeshBlend, element: int, point: np.ndarray) -> np.ndarray:
    """Mesh velocity at a reference point of an element (independent of varsigma)."""
    dim = mesh_blend.topology.dim
    lam = barycentric(dim, np.reshape(point, (1, dim)))[0]
    verts = mesh_blend.topology.elements[element]
    return lam @ mesh_blend.displacement[verts]


def min_element_height(mesh: Mesh) -> float:
    """Segment length in 1D; smallest altitude (2*area / longest edge) in 2D."""
    return float(mesh.heights.min())


# -- construction -----------------------------------------------------------

def _normalize_boundary_spec(dim: int, spec: BoundarySpec) -> Dict[str, BoundaryKind]:
    sides = SIDES[: 2 * dim]
    if spec is None:
        return {s: BoundaryKind.OUTFLOW for s in sides}
    if isinstance(spec, (str, BoundaryKind)):
        kind = BoundaryKind(spec)
        return {s: kind for s in sides}
    resolved = {s: BoundaryKind(spec.get(s, BoundaryKind.OUTFLOW)) for s in sides}
    for high, low in _PERIODIC_PAIRS[:dim]:
        if (resolved[high] == BoundaryKind.PERIODIC) != (resolved[low] == BoundaryKind.PERIODIC):
            raise MeshError(f"periodic boundary on {high}/{low} must be set on both sides")
    return resolved


def _side_of(points: np.ndarray, lo: np.ndarray, hi: np.ndarray, tol: float) -> str:
    for axis in range(points.shape[1]):
        if np.all(np.abs(points[:, axis] - lo[axis]) <= tol):
            return ("xmin", "ymin")[axis]
        if np.all(np.abs(points[:, axis] - hi[axis]) <= tol):
            return ("xmax", "ymax")[axis]
    return ""


def build_mesh(
    vertices: np.ndarray,
    connectivity: np.ndarray,
    boundary_spec: BoundarySpec = None,
) -> Mesh:
    """Build topology and geometry from vertices and element connectivity.

    Boundary edges are tagged by the side of the bounding box they lie on;
    ``boundary_spec`` maps sides (xmin, xmax, ymin, ymax) to a
    :class:`BoundaryKind`. Periodic sides are paired by translation and turned
    into interior edges between the two adjacent elements.
    """
    vertices = np.asarray(vertices, dtype=float)
    if vertices.ndim == 1:
        vertices = vertices[:, None]
    elements = np.asarray(connectivity, dtype=int)
    n_vertices, dim = vertices.shape
    if dim not in (1, 2) or elements.ndim != 2 or elements.shape[1] != dim + 1:
        raise MeshError(f"connectivity shape {elements.shape} does not match dim={dim}")
    if elements.size and (elements.min() < 0 or elements.max() >= n_vertices):
        raise MeshError("connectivity index out of range")
    for e, verts in enumerate(elements):
        if len(set(verts.tolist())) != len(verts):
            raise MeshError(f"degenerate element {e}: repeated vertex index", element=e)
    keys = [tuple(sorted(v)) for v in elements.tolist()]
    if len(set(keys)) != len(keys):
        raise MeshError("duplicate elements in connectivity")

    kinds = _normalize_boundary_spec(dim, boundary_spec)
    lo, hi = vertices.min(axis=0), vertices.max(axis=0)
    tol = 1e-9 * max(float(np.max(hi - lo)), 1.0)

    # gather faces: key -> [(element, face, ordered vertex tuple)]
    n_faces = dim + 1
    faces: Dict[Tuple[int, ...], List[Tuple[int, int, Tuple[int, ...]]]] = {}
    for e in range(elements.shape[0]):
        for f in range(n_faces):
            ordered = tuple(int(elements[e, lv]) for lv in face_vertices(dim, f))
            faces.setdefault(tuple(sorted(ordered)), []).append((e, f, ordered))

    edge_rows: List[Tuple] = []  # (left elem, left face, left verts, right elem, right face, right verts, kind, side)
    boundary: Dict[str, List[Tuple[int, int, Tuple[int, ...]]]] = {s: [] for s in SIDES[: 2 * dim]}
    for key, owners in faces.items():
        if len(owners) > 2:
            raise MeshError(f"face {key} shared by more than two elements")
        if len(owners) == 2:
            (e1, f1, o1), (e2, f2, _) = sorted(owners)
            edge_rows.append((e1, f1, o1, e2, f2, o1, EDGE_INTERIOR, ""))
            continue
        e, f, ordered = owners[0]
        side = _side_of(vertices[list(ordered)], lo, hi, tol)
        if side and kinds[side] == BoundaryKind.PERIODIC:
            boundary[side].append((e, f, ordered))
        else:
            kind = _KIND_CODES[kinds[side]] if side else EDGE_OUTFLOW
            edge_rows.append((e, f, ordered, -1, -1, ordered, kind, side))

    for high, low in _PERIODIC_PAIRS[:dim]:
        if kinds[high] != BoundaryKind.PERIODIC:
            continue
        edge_rows.extend(_pair_periodic(vertices, boundary[high], boundary[low], _SIDE_AXIS[high], tol, high))

    edge_rows.sort(key=lambda r: (r[0], r[1]))
    n_edges = len(edge_rows)
    edge_vertices = np.zeros((n_edges, 2, dim), dtype=int)
    edge_elements = np.full((n_edges, 2), -1, dtype=int)
    edge_faces = np.full((n_edges, 2), -1, dtype=int)
    edge_tables = np.full((n_edges, 2), -1, dtype=int)
    edge_kinds = np.zeros(n_edges, dtype=int)
    edge_sides: List[str] = []
    element_edges = np.full((elements.shape[0], n_faces), -1, dtype=int)
    element_sides = np.zeros((elements.shape[0], n_faces), dtype=int)
    for i, (el, fl, vl, er, fr, vr, kind, side) in enumerate(edge_rows):
        edge_vertices[i, 0] = vl
        edge_vertices[i, 1] = vr
        edge_elements[i] = (el, er)
        edge_faces[i] = (fl, fr)
        edge_tables[i, 0] = face_table(dim, fl, 0)
        element_edges[el, fl] = i
        element_sides[el, fl] = 0
        if er >= 0:
            edge_tables[i, 1] = face_table(dim, fr, 1)
            element_edges[er, fr] = i
            element_sides[er, fr] = 1
        edge_kinds[i] = kind
        edge_sides.append(side)

    mobility = np.ones((n_vertices, dim))
    for (el, fl, vl, er, fr, vr, kind, side) in edge_rows:
        if kind == EDGE_INTERIOR:
            continue
        for verts in (vl, vr):
            if kind == EDGE_PERIODIC or not side:
                mobility[list(verts)] = 0.0
            else:
                mobility[list(verts), _SIDE_AXIS[side]] = 0.0

    topology = MeshTopology(
        dim=dim,
        n_vertices=n_vertices,
        elements=elements,
        edge_vertices=edge_vertices,
        edge_elements=edge_elements,
        edge_faces=edge_faces,
        edge_tables=edge_tables,
        edge_kinds=edge_kinds,
        edge_sides=tuple(edge_sides),
        element_edges=element_edges,
        element_sides=element_sides,
        vertex_mobility=mobility,
    )
    return Mesh(topology, vertices)


def _pair_periodic(vertices, high_faces, low_faces, axis, tol, side):
    """Match boundary faces on opposite periodic sides by translation."""
    if len(high_faces) != len(low_faces):
        raise MeshError(f"unmatched periodic edge on {side}: {len(high_faces)} vs {len(low_faces)} faces")
    tangential = [a for a in range(vertices.shape[1]) if a != axis]

    def signature(ordered):
        if not tangential:
            return np.zeros(2)
        t = vertices[list(ordered), tangential[0]]
        return np.array([t.min(), t.max()])

    low_sigs = np.array([signature(o) for (_, _, o) in low_faces]).reshape(len(low_faces), 2)
    used = np.zeros(len(low_faces), dtype=bool)
    rows = []
    for (e1, f1, o1) in high_faces:
        dist = np.abs(low_sigs - signature(o1)).max(axis=1)
        dist[used] = np.inf
        j = int(np.argmin(dist))
        if dist[j] > tol:
            raise MeshError(f"unmatched periodic edge on {side} at element {e1}", element=e1)
        used[j] = True
        e2, f2, o2 = low_faces[j]
        # translation reverses traversal: o1[0] pairs with o2[-1]
        partner_of_o1 = tuple(reversed(o2))
        partner_of_o2 = tuple(reversed(o1))
        if e1 < e2:
            rows.append((e1, f1, o1, e2, f2, partner_of_o1, EDGE_PERIODIC, side))
        else:
            rows.append((e2, f2, o2, e1, f1, partner_of_o2, EDGE_PERIODIC, side))
    return rows


def interval_mesh(a: float, b: float, n: int, boundary_spec: BoundarySpec = None) -> Mesh:
    """Uniform mesh of n segments on (a, b)."""
    if n < 1 or not b > a:
        raise MeshError(f"invalid interval mesh ({a}, {b}) with n={n}")
    x = np.linspace(a, b, n + 1)
    connectivity = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
    return build_mesh(x[:, None], connectivity, boundary_spec)


def rectangle_mesh(
    x_range: Tuple[float, float],
    y_range: Tuple[float, float],
    nx: int,
    ny: int,
    boundary_spec: BoundarySpec = None,
) -> Mesh:
    """Structured triangulation: each of nx*ny quads split along its (0,0)-(1,1) diagonal."""
    if nx < 1 or ny < 1:
        raise MeshError(f"invalid rectangle mesh resolution {nx}x{ny}")
    xs = np.linspace(x_range[0], x_range[1], nx + 1)
    ys = np.linspace(y_range[0], y_range[1], ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.stack([X.ravel(), Y.ravel()], axis=1)

    def vid(i, j):
        return j * (nx + 1) + i

    triangles = []
    for j in range(ny):
        for i in range(nx):
            v00, v10, v01, v11 = vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1)
            triangles.append((v00, v10, v11))
            triangles.append((v00, v11, v01))
    return build_mesh(vertices, np.array(triangles), boundary_spec)


def rectangle_resolution(n_elements: int, x_range, y_range) -> Tuple[int, int]:
    """Pick (nx, ny) with 2*nx*ny == n_elements and aspect closest to the domain's."""
    if n_elements < 2 or n_elements % 2:
        raise MeshError(f"2D element count must be even, got {n_elements}")
    quads = n_elements // 2
    aspect = (x_range[1] - x_range[0]) / (y_range[1] - y_range[0])
    best: Optional[Tuple[float, int, int]] = None
    for ny in range(1, quads + 1):
        if quads % ny:
            continue
        nx = quads // ny
        score = abs(np.log(nx / ny) - np.log(aspect))
        if best is None or score < best[0] - 1e-12:
            best = (score, nx, ny)
    assert best is not None
    return best[1], best[2]


def locate_points(mesh: Mesh, points: np.ndarray, tol: float = 1e-10):
    """Find containing elements and reference coordinates for physical points.

    Returns ``(elements, ref_points, found)``; points outside every element
    fall back to the nearest candidate with clipped reference coordinates and
    ``found`` False.
    """
    points = np.asarray(points, dtype=float).reshape(-1, mesh.dim)
    if mesh.dim == 1:
        left = mesh.vertices[mesh.elements[:, 0], 0]
        order = np.argsort(left)
        idx = np.clip(np.searchsorted(left[order], points[:, 0], side="right") - 1, 0, mesh.n_elements - 1)
        elems = order[idx]
        ref = mesh.to_reference(elems, points)
        found = (ref[:, 0] >= -tol) & (ref[:, 0] <= 1.0 + tol)
        return elems, np.clip(ref, 0.0, 1.0), found

    k = min(12, mesh.n_elements)
    _, cand = cKDTree(mesh.centroids).query(points, k=k)
    cand = np.asarray(cand).reshape(points.shape[0], k)
    x0 = mesh.vertices[mesh.elements[cand, 0]]                       # (P, k, 2)
    ref = np.einsum("pkij,pkj->pki", mesh.inverse_jacobian[cand], points[:, None, :] - x0)
    lam_min = np.minimum(1.0 - ref.sum(axis=2), ref.min(axis=2))    # (P, k)
    inside = lam_min >= -tol
    pick = np.where(inside.any(axis=1), inside.argmax(axis=1), lam_min.argmax(axis=1))
    rows = np.arange(points.shape[0])
    elems = cand[rows, pick]
    ref = ref[rows, pick]
    found = inside[rows, pick]
    lam = np.clip(barycentric(2, ref), 0.0, None)
    lam /= lam.sum(axis=1, keepdims=True)
    return elems, lam[:, 1:], found
