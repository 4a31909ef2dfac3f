"""Core ports (interfaces) for external dependencies."""

from .output import MeshTrajectory, NullWriter, Snapshot, SnapshotWriterPort

__all__ = [
    "MeshTrajectory",
    "NullWriter",
    "Snapshot",
    "SnapshotWriterPort",
]
