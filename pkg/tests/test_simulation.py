"""Tests for the simulation use case."""

from pathlib import Path
from unittest.mock import MagicMock, patch

import numpy as np
import pytest

from adapters.output.writers import FileSnapshotWriter
from core.domain.problem import MeshMode, ProblemConfig, ReferenceKind
from core.domain.problems import get_problem
from core.exceptions import PositivityError
from core.numerics.mesh_adapt import element_density_ratio
from core.ports.output import NullWriter
from core.usecases.error_analysis import FieldReference, LakeAtRestReference, compute_errors
from core.usecases.simulation import SimulationUseCase, initial_mesh


def _config(problem_id, **overrides):
    values = get_problem(problem_id).default_config()
    values.update(overrides)
    return ProblemConfig(**values)


def test_initial_mesh_resolution():
    """Test the uniform starting meshes in 1D and 2D."""
    assert initial_mesh(_config("ex4_1_step", n_elements=30)).n_elements == 30
    mesh = initial_mesh(_config("ex4_7_hump2d", n_elements=64))
    assert mesh.n_elements == 64
    assert mesh.total_measure == pytest.approx(4.0)


def test_zero_final_time_returns_initial_state(test_settings):
    """Test that t_final = 0 takes no step and writes only the initial snapshot."""
    writer = MagicMock()
    writer.write_snapshot.return_value = []
    result = SimulationUseCase(_config("ex4_4_dam", n_elements=20, t_final=0.0), writer, test_settings).run()
    assert result.steps == 0
    assert result.t == 0.0
    assert writer.write_snapshot.call_count == 1
    assert result.trajectory.times == [0.0]


def test_moving_lake_at_rest_stays_at_rest(test_settings):
    """Test that the lake at rest over a step survives adaptation, remap and steps."""
    config = _config("ex4_1_step", n_elements=20, degree=1, t_final=0.01)
    use_case = SimulationUseCase(config, NullWriter(), test_settings)
    result = use_case.run()
    assert result.steps > 0
    assert result.t == pytest.approx(0.01)
    assert result.diagnostics["adaptations"] == result.steps
    reference = use_case.reference_for(result)
    assert isinstance(reference, LakeAtRestReference)

    errors = compute_errors(result.state, result.bottom, reference)
    assert errors.max_error() < 1e-10
    assert result.diagnostics["depth_mass_drift"] < 1e-12


def test_mesh_moves_towards_the_step(test_settings):
    """Test that adaptation concentrates elements at the bottom discontinuities."""
    config = _config("ex4_1_step", n_elements=20, degree=1, t_final=0.005)
    result = SimulationUseCase(config, NullWriter(), test_settings).run()
    mesh = result.mesh
    x = mesh.centroids[:, 0]
    near_step = (np.abs(x - 0.3) < 0.06) | (np.abs(x - 0.7) < 0.06)
    assert mesh.measures[near_step].mean() < mesh.measures[~near_step].mean()
    assert mesh.total_measure == pytest.approx(1.0)


def test_output_times_are_hit_exactly(test_settings):
    """Test snapshots land on the requested times."""
    writer = MagicMock()
    writer.write_snapshot.return_value = []
    config = _config("ex4_4_dam", n_elements=20, degree=1, t_final=0.02, output_times=[0.01], mesh_mode=MeshMode.FIXED)
    result = SimulationUseCase(config, writer, test_settings).run()
    times = [call.args[0].t for call in writer.write_snapshot.call_args_list]
    assert times == [0.0, 0.01, 0.02]
    assert result.trajectory.times == [0.0, 0.01, 0.02]


def test_dry_dam_break_stays_nonnegative(test_settings):
    """Test a short moving-mesh run onto a dry bed."""
    config = _config("ex4_5_dry", n_elements=40, degree=1, t_final=0.01)
    result = SimulationUseCase(config, NullWriter(), test_settings).run()
    pp = result.state.pp_values()
    assert pp[:, :, 0].min() >= -1e-12
    assert pp[:, :, -1].min() >= -1e-12
    assert result.diagnostics["min_depth_pp"] >= -1e-12
    assert result.mesh.total_measure == pytest.approx(2.0)


def test_runs_are_deterministic(test_settings):
    """Test that the same configuration reproduces the same coefficients."""
    config = _config("ex4_4_dam", n_elements=20, degree=2, t_final=0.005)
    first = SimulationUseCase(config, NullWriter(), test_settings).run()
    second = SimulationUseCase(config, NullWriter(), test_settings).run()
    np.testing.assert_array_equal(first.state.coeffs, second.state.coeffs)
    np.testing.assert_array_equal(first.mesh.vertices, second.mesh.vertices)


def test_positivity_failure_propagates(test_settings):
    """Test that a violated positivity precondition aborts the run."""
    config = _config("ex4_4_dam", n_elements=10, degree=1, t_final=0.01, mesh_mode=MeshMode.FIXED)
    failing = MagicMock(side_effect=PositivityError(element=3, average=-1.0))
    with patch("core.usecases.simulation.ssp_rk3_step", failing):
        with pytest.raises(PositivityError) as exc_info:
            SimulationUseCase(config, NullWriter(), test_settings).run()
    assert exc_info.value.exit_code == 4
    assert exc_info.value.details["context"]["operation"] == "time_step"


def test_execute_writes_run_artifacts(tmp_path, test_settings):
    """Test the files of a short 1D run with an exact reference."""
    config = _config("ex4_1_bumps", n_elements=20, degree=1, t_final=0.002)
    result = SimulationUseCase(config, FileSnapshotWriter(tmp_path), test_settings).execute()
    names = {Path(p).name for p in result.written}
    assert {
        "solution_initial.txt",
        "coeffs_initial.txt",
        "solution_final.txt",
        "coeffs_final.txt",
        "errors.csv",
        "mesh_trajectory.txt",
        "manifest.cfg",
    } <= names
    assert result.report is not None
    assert result.report.max_error() < 1e-10
    assert (tmp_path / "errors.csv").read_text().startswith("variable,L1,Linf")


def test_execute_2d_writes_vtk_and_mesh(tmp_path, test_settings):
    """Test 2D snapshot files of a fixed-mesh run without a reference."""
    config = _config(
        "ex4_7_hump2d",
        n_elements=64,
        degree=1,
        t_final=0.002,
        output_times=[],
        mesh_mode=MeshMode.FIXED,
        reference=ReferenceKind.NONE,
    )
    result = SimulationUseCase(config, FileSnapshotWriter(tmp_path), test_settings).execute()
    names = {Path(p).name for p in result.written}
    assert {"solution_final.vtk", "mesh_final.txt", "mesh_trajectory.txt", "manifest.cfg"} <= names
    assert "errors.csv" not in names
    assert result.report is None


def test_fine_reference_runs_refined_fixed_mesh(test_settings):
    """Test the fixed-mesh reference for problems without an exact solution."""
    config = _config("ex4_4_dam", n_elements=10, degree=1, t_final=0.002, reference=ReferenceKind.FINE, reference_refinement=2)
    use_case = SimulationUseCase(config, NullWriter(), test_settings)
    result = use_case.run()
    reference = use_case.reference_for(result)
    assert isinstance(reference, FieldReference)
    assert reference.state.mesh.n_elements == 20


@pytest.mark.slow
def test_lake_at_rest_step_to_final_time(test_settings):
    """Test the full moving-mesh lake-at-rest run over the step."""
    config = _config("ex4_1_step", degree=2)
    result = SimulationUseCase(config, NullWriter(), test_settings).execute()
    assert result.t == pytest.approx(1.0)
    assert result.report.max_error() < 1e-10


@pytest.mark.slow
def test_lake_at_rest_2d_to_final_time(test_settings):
    """Test the full moving-mesh 2D lake at rest over two Gaussian mounds."""
    config = _config("ex4_6_rest2d", degree=2)
    result = SimulationUseCase(config, NullWriter(), test_settings).execute()
    assert result.report.max_error() < 1e-10


@pytest.mark.slow
def test_temperature_compensated_pulse_stays_in_place(test_settings):
    """Test that the standing surface bump keeps its place at -1.45 with about half the pulse height."""
    result = SimulationUseCase(_config("ex4_3_data2", n_elements=300, t_final=0.4), NullWriter(), test_settings).run()
    x = result.mesh.centroids[:, 0]
    bump = result.state.cell_averages()[:, 0] + result.bottom.cell_averages()[:, 0] - 6.0
    window = (np.abs(x + 1.45) < 0.25) & (bump > 0.0)
    weights = result.mesh.measures[window] * bump[window]
    center = float(np.sum(weights * x[window]) / np.sum(weights))
    assert center == pytest.approx(-1.45, abs=0.01)
    assert 0.004 <= bump[window].max() <= 0.006


@pytest.mark.slow
def test_2d_pulse_attracts_elements(test_settings):
    """Test at least twice the element density in the outgoing wave band compared with the far field."""
    config = _config("ex4_7_hump2d", n_elements=3600, t_final=0.16, output_times=[], reference=ReferenceKind.NONE)
    result = SimulationUseCase(config, NullWriter(), test_settings).run()
    assert result.t == pytest.approx(0.16)
    surface = result.state.cell_averages()[:, 0] + result.bottom.cell_averages()[:, 0]
    wave = np.abs(surface - 6.0)
    band = wave > 0.1 * wave.max()
    assert element_density_ratio(result.mesh, band) >= 2.0
