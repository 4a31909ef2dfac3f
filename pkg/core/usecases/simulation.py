"""
Simulation use case - the moving-mesh DG time loop
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from config.settings import Settings, get_settings

from ..domain.dg import DGField, build_basis, integrate
from ..domain.mesh import Mesh, MeshBlend, interval_mesh, rectangle_mesh, rectangle_resolution
from ..domain.problem import MeshMode, ProblemConfig, ReferenceKind, StepControl
from ..domain.problems import ProblemDefinition, get_problem, project_initial
from ..domain.report import ErrorReport
from ..exceptions import InternalError
from ..numerics.limiters import StageLimiter
from ..numerics.mesh_adapt import MetricField, adaptation_metric, move_mesh
from ..numerics.remap import plan_remap, remap_state
from ..numerics.time_integration import compute_dt, ssp_rk3_step
from ..ports.output import MeshTrajectory, NullWriter, Snapshot, SnapshotWriterPort
from ..utils.error_handler import ErrorContext, StandardizedErrorHandler, handle_errors
from ..utils.logging import LogCategory, MetricsCollector, create_logger, log_operation
from .error_analysis import FieldReference, LakeAtRestReference, ReferenceSolution, compute_errors

logger = create_logger(__name__, LogCategory.SOLVER)

TIME_MATCH_TOL = 1e-12


def initial_mesh(config: ProblemConfig) -> Mesh:
    """Uniform starting mesh of the configured resolution."""
    if config.dim == 1:
        lo, hi = config.domain[0]
        return interval_mesh(lo, hi, config.n_elements, config.boundary)
    nx, ny = rectangle_resolution(config.n_elements, config.domain[0], config.domain[1])
    return rectangle_mesh(config.domain[0], config.domain[1], nx, ny, config.boundary)


@dataclass
class RunResult:
    """Final state of one run plus what was recorded on the way."""

    config: ProblemConfig
    state: DGField
    bottom: DGField
    t: float
    steps: int
    trajectory: MeshTrajectory
    diagnostics: Dict[str, object] = field(default_factory=dict)
    report: Optional[ErrorReport] = None
    written: List[str] = field(default_factory=list)

    @property
    def mesh(self) -> Mesh:
        return self.state.mesh


class SimulationUseCase:
    """Runs one configuration: project, then adapt / remap / step until t_final."""

    def __init__(
        self,
        config: ProblemConfig,
        writer: Optional[SnapshotWriterPort] = None,
        settings: Optional[Settings] = None,
    ):
        self.config = config
        self.writer = writer or NullWriter()
        self.settings = settings or get_settings()
        self.problem: ProblemDefinition = get_problem(config.problem)
        self.metrics = MetricsCollector()
        self._error_handler = StandardizedErrorHandler(__name__)
        self.logger = logger.bind(problem=config.problem, n_elements=config.n_elements)

    # -- main loop --------------------------------------------------------------
    @handle_errors("simulation_run")
    def run(self) -> RunResult:
        """Integrate to t_final, writing snapshots at every output time."""
        cfg = self.config
        g = cfg.gravity
        dry_tol = cfg.dry_tol
        moving = cfg.mesh_mode == MeshMode.MOVING
        adapt_cfg = cfg.adapt_config()

        with log_operation(self.logger, "run", mesh_mode=cfg.mesh_mode.value, degree=cfg.degree):
            mesh = initial_mesh(cfg)
            basis = build_basis(cfg.dim, cfg.degree)
            state, bottom = project_initial(self.problem, mesh, basis)
            reference_vertices = mesh.vertices.copy()
            limiter = StageLimiter(cfg.limiter_config(), g, self.metrics)
            state, bottom = limiter(state, bottom)

            ctl: StepControl = cfg.step_control()
            trajectory = MeshTrajectory()
            written: List[str] = []
            initial_mass = integrate(state).sum(axis=0)
            initial_measure = mesh.total_measure

            metric: Optional[MetricField] = None
            trajectory.record(ctl.t, mesh.vertices)
            written += self._snapshot(0, ctl.t, state, bottom, metric, "initial")

            step = 0
            while not ctl.finished:
                try:
                    if moving and step % adapt_cfg.adapt_every == 0:
                        metric, state, bottom = self._adapt(state, bottom, reference_vertices, adapt_cfg)
                        mesh = state.mesh

                    stop = ctl.next_stop()
                    dt = compute_dt(state, ctl, g, dry_tol)
                    if not dt > 0.0:
                        raise InternalError(f"non-positive time step {dt}", component="time_integration")
                    state, bottom = ssp_rk3_step(state, bottom, dt, limiter, g, dry_tol)
                    t_new = ctl.t + dt
                    if abs(t_new - stop) <= TIME_MATCH_TOL * max(1.0, abs(stop)):
                        t_new = stop
                    ctl.t = t_new
                    step += 1
                except Exception as exc:
                    self._error_handler.handle_error(
                        exc,
                        ErrorContext("time_step", step=step, time=ctl.t, additional_context={"problem": cfg.problem}),
                    )

                self.metrics.increment_counter("steps")
                self.metrics.record_minimum("min_element_measure", float(mesh.measures.min()))
                self.logger.log_step(step, ctl.t, dt, min_depth=float(state.cell_averages()[:, 0].min()))

                hit_output = ctl.t == stop and stop in ctl.output_times
                if hit_output or (ctl.finished and cfg.t_final > 0.0):
                    trajectory.record(ctl.t, mesh.vertices)
                    written += self._snapshot(step, ctl.t, state, bottom, metric, "final" if ctl.finished else "")
                elif cfg.snapshot_every and step % cfg.snapshot_every == 0:
                    written += self._snapshot(step, ctl.t, state, bottom, metric, f"step{step:06d}")

            final_mass = integrate(state).sum(axis=0)
            diagnostics = self.metrics.get_metrics()
            diagnostics["steps"] = step
            diagnostics["total_measure_drift"] = abs(mesh.total_measure - initial_measure) / initial_measure
            diagnostics["depth_mass_drift"] = float(abs(final_mass[0] - initial_mass[0]) / max(abs(initial_mass[0]), 1e-300))
            diagnostics["eta_mass_drift"] = float(abs(final_mass[-1] - initial_mass[-1]) / max(abs(initial_mass[-1]), 1e-300))
            self.logger.log_diagnostics(diagnostics)

        return RunResult(
            config=cfg,
            state=state,
            bottom=bottom,
            t=ctl.t,
            steps=step,
            trajectory=trajectory,
            diagnostics=diagnostics,
            written=written,
        )

    def _adapt(self, state: DGField, bottom: DGField, reference_vertices: np.ndarray, adapt_cfg):
        """Build the metric, move the nodes and carry the solution over."""
        mesh = state.mesh
        with log_operation(self.logger, "adapt"):
            metric = adaptation_metric(state, bottom, adapt_cfg, self.config.gravity, self.config.dry_tol)
            coords = move_mesh(mesh, metric, adapt_cfg, reference_vertices, self.metrics)
            new_mesh = mesh.with_vertices(coords)
            plan = plan_remap(MeshBlend.between(mesh, new_mesh), state.basis, adapt_cfg.remap_cfl)
            state, bottom = remap_state(state, bottom, plan, new_mesh)
        self.metrics.increment_counter("remap_substeps", plan.n_steps)
        self.metrics.increment_counter("adaptations")
        return metric, state, bottom

    def _snapshot(
        self,
        step: int,
        t: float,
        state: DGField,
        bottom: DGField,
        metric: Optional[MetricField],
        tag: str,
    ) -> List[str]:
        matrices = metric.matrices if (metric is not None and self.config.dump_metric) else None
        snapshot = Snapshot(step=step, t=t, state=state, bottom=bottom, metric=matrices, tag=tag)
        with log_operation(self.logger, "write_snapshot", step=step, t=t):
            return self.writer.write_snapshot(snapshot, self.config)

    # -- run + errors + artifacts ---------------------------------------------------
    def reference_for(self, result: RunResult) -> Optional[ReferenceSolution]:
        """Exact lake-at-rest reference, or a fixed-mesh run at higher resolution."""
        cfg = self.config
        if cfg.reference == ReferenceKind.NONE:
            return None
        if cfg.reference == ReferenceKind.EXACT:
            if self.problem.lake_at_rest is None:
                raise InternalError(f"problem {cfg.problem} has no exact solution", component="error_analysis")
            return LakeAtRestReference(self.problem.lake_at_rest, cfg.dim)
        fine_cfg = cfg.refined(cfg.reference_refinement)
        self.logger.info("running fine reference", n_elements=fine_cfg.n_elements)
        fine = SimulationUseCase(fine_cfg, NullWriter(), self.settings).run()
        return FieldReference(fine.state, fine.bottom)

    @handle_errors("simulation_execute")
    def execute(self) -> RunResult:
        """Run, measure errors when a reference exists, write errors, trajectory and manifest."""
        result = self.run()
        reference = self.reference_for(result)
        if reference is not None:
            result.report = compute_errors(
                result.state,
                result.bottom,
                reference,
                problem=self.config.problem,
                t=result.t,
                reference_kind=self.config.reference.value,
            )
            result.written.append(self.writer.write_errors(result.report))
        result.written.append(self.writer.write_trajectory(result.trajectory))
        result.written.append(self.writer.write_manifest(self.config, result.diagnostics))
        result.written = [p for p in result.written if p]
        return result
