"""File-system implementation of the snapshot writer port."""

import csv
from pathlib import Path
from typing import Dict, List, Union

import numpy as np

from adapters.config import format_manifest
from core.domain.dg import DGField, gauss_legendre
from core.domain.problem import ProblemConfig
from core.domain.report import ConvergenceTable, ErrorReport
from core.exceptions import OutputError
from core.numerics.ripa_model import temperature
from core.ports.output import MeshTrajectory, Snapshot, SnapshotWriterPort
from core.utils.logging import LogCategory, create_logger

from .mesh_io import write_mesh

logger = create_logger(__name__, LogCategory.IO)

COLUMNS_1D = ("x", "h", "b", "h+b", "hu", "htheta", "theta")
VTK_TRIANGLE = 5


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def sample_1d(state: DGField, bottom: DGField, dry_tol: float = 1e-6) -> np.ndarray:
    """Rows (x, h, b, h+b, hu, h theta, theta) at k+1 Gauss points per element, ordered by x."""
    basis = state.basis
    points, _ = gauss_legendre(basis.degree + 1)
    phi = basis.evaluate_basis(points[:, None])
    x = state.mesh.to_physical(points[:, None])[..., 0].reshape(-1)
    U = state.values_at(phi).reshape(-1, state.n_comp)
    b = bottom.values_at(phi)[..., 0].reshape(-1)
    theta = temperature(U, dry_tol)
    table = np.stack([x, U[:, 0], b, U[:, 0] + b, U[:, 1], U[:, -1], theta], axis=1)
    return table[np.argsort(x, kind="stable")]


def format_text_1d(state: DGField, bottom: DGField, t: float, dry_tol: float = 1e-6) -> str:
    lines = [f"# t = {_fmt(t)}", "# " + " ".join(COLUMNS_1D)]
    lines += [" ".join(_fmt(v) for v in row) for row in sample_1d(state, bottom, dry_tol)]
    return "\n".join(lines) + "\n"


def format_vtk(state: DGField, bottom: DGField, t: float, dry_tol: float = 1e-6) -> str:
    """Legacy ASCII unstructured grid with cell-averaged fields."""
    mesh = state.mesh
    U = state.cell_averages()
    b = bottom.cell_averages()[:, 0]
    fields = {
        "h": U[:, 0],
        "b": b,
        "h_plus_b": U[:, 0] + b,
        "hu": U[:, 1],
        "hv": U[:, 2],
        "htheta": U[:, -1],
        "theta": temperature(U, dry_tol),
    }
    lines = [
        "# vtk DataFile Version 2.0",
        f"ripa-mmdg t={_fmt(t)}",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_vertices} double",
    ]
    lines += [f"{_fmt(x)} {_fmt(y)} 0" for x, y in mesh.vertices]
    lines.append(f"CELLS {mesh.n_elements} {4 * mesh.n_elements}")
    lines += [f"3 {a} {b_} {c}" for a, b_, c in mesh.elements]
    lines.append(f"CELL_TYPES {mesh.n_elements}")
    lines += [str(VTK_TRIANGLE)] * mesh.n_elements
    lines.append(f"CELL_DATA {mesh.n_elements}")
    for name, values in fields.items():
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines += [_fmt(v) for v in values]
    return "\n".join(lines) + "\n"


def format_coefficients(state: DGField, bottom: DGField) -> str:
    """Rows ``element mode c_0 ... c_{nc-1} b``."""
    nc = state.n_comp
    header = "# element mode " + " ".join(f"c{i}" for i in range(nc)) + " b"
    lines = [header]
    for e in range(state.coeffs.shape[0]):
        for j in range(state.coeffs.shape[1]):
            values = list(state.coeffs[e, j]) + [bottom.coeffs[e, j, 0]]
            lines.append(f"{e} {j} " + " ".join(_fmt(v) for v in values))
    return "\n".join(lines) + "\n"


def format_metric(matrices: np.ndarray) -> str:
    dim = matrices.shape[1]
    names = " ".join(f"m{i}{j}" for i in range(dim) for j in range(dim))
    lines = [f"# element {names}"]
    lines += [f"{e} " + " ".join(_fmt(v) for v in m.reshape(-1)) for e, m in enumerate(matrices)]
    return "\n".join(lines) + "\n"


def format_trajectory(trajectory: MeshTrajectory) -> str:
    """1D: one row ``t x_0 ... x_n`` per frame; 2D: a ``# t`` block of vertex rows per frame."""
    lines: List[str] = []
    for t, coords in zip(trajectory.times, trajectory.coordinates):
        if coords.shape[1] == 1:
            order = np.argsort(coords[:, 0], kind="stable")
            lines.append(" ".join([_fmt(t)] + [_fmt(x) for x in coords[order, 0]]))
        else:
            lines.append(f"# t = {_fmt(t)}")
            lines += [" ".join(_fmt(c) for c in row) for row in coords]
    return "\n".join(lines) + "\n"


class FileSnapshotWriter(SnapshotWriterPort):
    """Writes every run artifact below one output directory."""

    def __init__(self, output_dir: Union[str, Path]):
        self.output_dir = Path(output_dir)

    def _ensure_dir(self) -> Path:
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OutputError(f"cannot create output directory {self.output_dir}: {exc}", path=str(self.output_dir), cause=exc) from exc
        return self.output_dir

    def _write(self, name: str, text: str) -> str:
        path = self._ensure_dir() / name
        try:
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc}", path=str(path), cause=exc) from exc
        logger.debug("file written", path=str(path))
        return str(path)

    def write_snapshot(self, snapshot: Snapshot, config: ProblemConfig) -> List[str]:
        label = snapshot.label
        state, bottom = snapshot.state, snapshot.bottom
        written = []
        if state.mesh.dim == 1:
            written.append(self._write(f"solution_{label}.txt", format_text_1d(state, bottom, snapshot.t, config.dry_tol)))
        else:
            written.append(self._write(f"solution_{label}.vtk", format_vtk(state, bottom, snapshot.t, config.dry_tol)))
            written.append(write_mesh(state.mesh, self._ensure_dir() / f"mesh_{label}.txt"))
        written.append(self._write(f"coeffs_{label}.txt", format_coefficients(state, bottom)))
        if snapshot.metric is not None:
            written.append(self._write(f"metric_{label}.txt", format_metric(snapshot.metric)))
        return written

    def write_errors(self, report: ErrorReport) -> str:
        path = self._ensure_dir() / "errors.csv"
        try:
            with path.open("w", newline="", encoding="utf-8") as handle:
                writer = csv.writer(handle)
                writer.writerow(["variable", "L1", "Linf"])
                writer.writerows(report.csv_rows())
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc}", path=str(path), cause=exc) from exc
        return str(path)

    def write_trajectory(self, trajectory: MeshTrajectory) -> str:
        return self._write("mesh_trajectory.txt", format_trajectory(trajectory))

    def write_manifest(self, config: ProblemConfig, diagnostics: Dict[str, object]) -> str:
        return self._write("manifest.cfg", format_manifest(config, diagnostics))

    def write_convergence(self, table: ConvergenceTable) -> str:
        path = self._ensure_dir() / "convergence.csv"
        header: List[str] = ["N"]
        for name in table.variables:
            header += [f"{name}_L1", f"{name}_L1_order", f"{name}_Linf", f"{name}_Linf_order"]
        try:
            with path.open("w", newline="", encoding="utf-8") as handle:
                writer = csv.writer(handle)
                writer.writerow(header)
                for row in table.rows:
                    cells: List[str] = [str(row.n_elements)]
                    for name in table.variables:
                        cells += [
                            repr(row.l1[name]),
                            _order_cell(row.order_l1.get(name)),
                            repr(row.linf[name]),
                            _order_cell(row.order_linf.get(name)),
                        ]
                    writer.writerow(cells)
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc}", path=str(path), cause=exc) from exc
        return str(path)


def _order_cell(order) -> str:
    return "" if order is None else f"{order:.4f}"


__all__ = ["FileSnapshotWriter", "format_text_1d", "format_vtk", "format_trajectory", "sample_1d"]
