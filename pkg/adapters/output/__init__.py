"""File writers for run artifacts."""

from .mesh_io import read_mesh, write_mesh
from .writers import FileSnapshotWriter

__all__ = ["FileSnapshotWriter", "read_mesh", "write_mesh"]
