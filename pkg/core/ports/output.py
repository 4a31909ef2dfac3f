"""Output port interface for run artifacts."""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..domain.dg import DGField
from ..domain.problem import ProblemConfig
from ..domain.report import ConvergenceTable, ErrorReport


@dataclass
class Snapshot:
    """Solution state at one output time."""

    step: int
    t: float
    state: DGField
    bottom: DGField
    metric: Optional[np.ndarray] = None          # (N, d, d) per-element metric
    tag: str = ""

    @property
    def label(self) -> str:
        return self.tag or f"t{self.t:.6f}"


@dataclass
class MeshTrajectory:
    """Vertex coordinates recorded at every output time."""

    times: List[float] = field(default_factory=list)
    coordinates: List[np.ndarray] = field(default_factory=list)

    def record(self, t: float, vertices: np.ndarray) -> None:
        self.times.append(float(t))
        self.coordinates.append(np.array(vertices, dtype=float, copy=True))


class SnapshotWriterPort(ABC):
    """Destination of every file a run produces."""

    @abstractmethod
    def write_snapshot(self, snapshot: Snapshot, config: ProblemConfig) -> List[str]:
        """
        Write solution samples (and coefficients, metric when configured).

        Args:
            snapshot: State at an output time
            config: Resolved run configuration

        Returns:
            Paths written
        """
        pass

    @abstractmethod
    def write_errors(self, report: ErrorReport) -> str:
        """Write the error table of a run."""
        pass

    @abstractmethod
    def write_trajectory(self, trajectory: MeshTrajectory) -> str:
        """Write vertex coordinates per output time."""
        pass

    @abstractmethod
    def write_manifest(self, config: ProblemConfig, diagnostics: Dict[str, object]) -> str:
        """Write the resolved configuration so the run can be repeated."""
        pass

    @abstractmethod
    def write_convergence(self, table: ConvergenceTable) -> str:
        """Write an observed-order table."""
        pass


class NullWriter(SnapshotWriterPort):
    """Writer that discards everything (reference runs, tests)."""

    def write_snapshot(self, snapshot: Snapshot, config: ProblemConfig) -> List[str]:
        return []

    def write_errors(self, report: ErrorReport) -> str:
        return ""

    def write_trajectory(self, trajectory: MeshTrajectory) -> str:
        return ""

    def write_manifest(self, config: ProblemConfig, diagnostics: Dict[str, object]) -> str:
        return ""

    def write_convergence(self, table: ConvergenceTable) -> str:
        return ""
