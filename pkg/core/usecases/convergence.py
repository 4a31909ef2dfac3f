"""Refinement study: errors of a run sequence against one fine fixed-mesh reference."""

from typing import List, Optional, Sequence

from config.settings import Settings, get_settings

from ..domain.problem import MeshMode, ProblemConfig, ReferenceKind
from ..domain.problems import get_problem
from ..domain.report import ConvergenceTable, ErrorReport, convergence_orders
from ..exceptions import ValidationError
from ..ports.output import NullWriter, SnapshotWriterPort
from ..utils.error_handler import handle_errors
from ..utils.logging import LogCategory, create_logger, log_operation
from .error_analysis import FieldReference, LakeAtRestReference, ReferenceSolution, compute_errors
from .simulation import SimulationUseCase

logger = create_logger(__name__, LogCategory.SOLVER)


class ConvergenceUseCase:
    """Runs ``base`` at every resolution in ``n_list`` and tabulates observed orders."""

    def __init__(
        self,
        base: ProblemConfig,
        n_list: Sequence[int],
        writer: Optional[SnapshotWriterPort] = None,
        settings: Optional[Settings] = None,
    ):
        if len(n_list) < 2:
            raise ValidationError("a refinement study needs at least two resolutions", field="n_list")
        self.base = base
        self.n_list = sorted(int(n) for n in n_list)
        self.writer = writer or NullWriter()
        self.settings = settings or get_settings()

    def _reference(self) -> ReferenceSolution:
        base = self.base
        problem = get_problem(base.problem)
        if base.reference == ReferenceKind.EXACT and problem.lake_at_rest is not None:
            return LakeAtRestReference(problem.lake_at_rest, base.dim)
        finest = base.model_copy(update={"n_elements": self.n_list[-1]})
        fine_cfg = finest.refined(base.reference_refinement)
        with log_operation(logger, "convergence_reference", n_elements=fine_cfg.n_elements):
            fine = SimulationUseCase(fine_cfg, NullWriter(), self.settings).run()
        return FieldReference(fine.state, fine.bottom)

    @handle_errors("convergence_study")
    def run(self) -> ConvergenceTable:
        reference = self._reference()
        reports: List[ErrorReport] = []
        for n in self.n_list:
            cfg = self.base.model_copy(update={"n_elements": n, "reference": ReferenceKind.NONE})
            with log_operation(logger, "convergence_run", n_elements=n, mesh_mode=cfg.mesh_mode.value):
                result = SimulationUseCase(cfg, NullWriter(), self.settings).run()
            reports.append(
                compute_errors(
                    result.state,
                    result.bottom,
                    reference,
                    problem=cfg.problem,
                    t=result.t,
                    reference_kind=self.base.reference.value,
                )
            )
        mode = self.base.mesh_mode.value if isinstance(self.base.mesh_mode, MeshMode) else str(self.base.mesh_mode)
        table = convergence_orders(reports, mesh_mode=mode, dim=self.base.dim)
        self.writer.write_convergence(table)
        return table
