"""Plain-text mesh files.

Layout::

    dim n_vertices n_elements
    x [y]                     # one row per vertex
    v0 v1 [v2]                # one row per element (0-based vertex ids)
"""

from pathlib import Path
from typing import Union

import numpy as np

from core.domain.mesh import BoundarySpec, Mesh, build_mesh
from core.exceptions import MeshError, OutputError


def format_mesh(mesh: Mesh) -> str:
    lines = [f"{mesh.dim} {mesh.n_vertices} {mesh.n_elements}"]
    lines += [" ".join(f"{c:.17g}" for c in row) for row in mesh.vertices]
    lines += [" ".join(str(int(v)) for v in row) for row in mesh.elements]
    return "\n".join(lines) + "\n"


def write_mesh(mesh: Mesh, path: Union[str, Path]) -> str:
    path = Path(path)
    try:
        path.write_text(format_mesh(mesh), encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write mesh file {path}: {exc}", path=str(path), cause=exc) from exc
    return str(path)


def parse_mesh(text: str, boundary_spec: BoundarySpec = None) -> Mesh:
    rows = [line.split() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    if not rows or len(rows[0]) != 3:
        raise MeshError("mesh header must be 'dim n_vertices n_elements'")
    dim, n_vertices, n_elements = (int(v) for v in rows[0])
    if len(rows) != 1 + n_vertices + n_elements:
        raise MeshError(f"mesh file has {len(rows) - 1} rows, expected {n_vertices + n_elements}")
    vertices = np.array([[float(c) for c in r] for r in rows[1 : 1 + n_vertices]])
    elements = np.array([[int(v) for v in r] for r in rows[1 + n_vertices :]], dtype=int)
    if vertices.shape != (n_vertices, dim):
        raise MeshError(f"vertex rows must have {dim} coordinates")
    return build_mesh(vertices, elements, boundary_spec)


def read_mesh(path: Union[str, Path], boundary_spec: BoundarySpec = None) -> Mesh:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise MeshError(f"cannot read mesh file {path}: {exc}", cause=exc) from exc
    return parse_mesh(text, boundary_spec)
