"""Tests for TVB, positivity and dry-cell limiting."""

import numpy as np
import pytest

from core.domain.dg import DGField, build_basis, l2_project
from core.domain.mesh import interval_mesh, rectangle_mesh
from core.domain.problem import LimiterConfig
from core.domain.problems import get_problem, project_initial
from core.exceptions import PositivityError
from core.numerics.limiters import (
    StageLimiter,
    bottom_correction,
    dry_fix,
    minmod,
    pp_limit,
    reconstruct_btheta,
    scale_to_nonnegative,
    tvb_limit,
    tvb_minmod,
)
from core.utils.logging import MetricsCollector


def _flat_bottom(mesh, basis):
    return DGField(mesh, basis, np.zeros((mesh.n_elements, basis.n_basis)))


def test_minmod():
    """Test sign agreement and smallest magnitude selection."""
    assert minmod(1.0, 2.0, 3.0) == 1.0
    assert minmod(-2.0, -1.0, -3.0) == -1.0
    assert minmod(-1.0, 2.0) == 0.0
    np.testing.assert_array_equal(minmod(np.array([1.0, -1.0]), np.array([0.5, 1.0])), [0.5, 0.0])


def test_tvb_minmod_keeps_small_slopes():
    """Test that |a1| <= M dx^2 passes unchanged."""
    assert tvb_minmod(0.01, -1.0, 1.0, m_tvb=10.0, dx=0.1) == 0.01
    assert tvb_minmod(0.5, -1.0, 1.0, m_tvb=10.0, dx=0.1) == 0.0
    assert tvb_minmod(1e-13, -1e-13, 1.0, m_tvb=0.0, dx=0.1, floor=1e-12) == 1e-13


def test_scale_to_nonnegative(basis_1d):
    """Test that scaling removes negative point values and keeps the average."""
    coeffs = np.array([[1.0, 0.0, 4.0], [1.0, 0.2, 0.0]])
    scaled, lam = scale_to_nonnegative(coeffs, basis_1d)
    values = basis_1d.pp_phi @ scaled.T
    assert values.min() >= -1e-14
    assert lam[0] == pytest.approx(np.sqrt(5.0) / 4.0)
    assert lam[1] == 1.0
    np.testing.assert_array_equal(scaled[:, 0], coeffs[:, 0])
    np.testing.assert_array_equal(scaled[1], coeffs[1])


def test_scale_to_nonnegative_rejects_negative_average(basis_1d):
    """Test that a negative mean names the element."""
    with pytest.raises(PositivityError) as exc_info:
        scale_to_nonnegative(np.array([[1.0, 0.0, 0.0], [-0.5, 0.0, 0.0]]), basis_1d)
    assert exc_info.value.details["element"] == 1
    assert exc_info.value.exit_code == 4


def test_scale_to_nonnegative_zeroes_roundoff_average(basis_1d):
    """Test that a round-off negative mean collapses to zero."""
    scaled, _ = scale_to_nonnegative(np.array([[-1e-14, 0.1, 0.0]]), basis_1d)
    np.testing.assert_array_equal(scaled, 0.0)


def test_pp_limit_leaves_positive_fields(line_mesh, basis_1d):
    """Test that positive depth and eta are untouched."""
    h = l2_project(lambda x: 1.0 + x[:, 0], line_mesh, basis_1d)
    eta = l2_project(lambda x: 2.0 + x[:, 0] ** 2, line_mesh, basis_1d)
    h_hat, eta_hat, lam_h, lam_eta = pp_limit(h, eta)
    np.testing.assert_array_equal(h_hat.coeffs, h.coeffs)
    np.testing.assert_array_equal(eta_hat.coeffs, eta.coeffs)
    assert np.all(lam_h == 1.0) and np.all(lam_eta == 1.0)


def test_bottom_correction_keeps_surface(line_mesh, basis_1d):
    """Test h_hat + b_hat = h + b."""
    h = l2_project(lambda x: np.abs(x[:, 0] - 0.55), line_mesh, basis_1d)
    b = l2_project(lambda x: np.sin(x[:, 0]), line_mesh, basis_1d)
    h_hat, _, _, _ = pp_limit(h, h)
    b_hat = bottom_correction(b, h, h_hat)
    np.testing.assert_allclose(h_hat.coeffs + b_hat.coeffs, h.coeffs + b.coeffs, atol=1e-15)


def test_reconstruct_btheta(line_mesh, basis_1d):
    """Test (b theta) = b * eta_bar / h_bar per element."""
    h = l2_project(lambda x: 2.0 + 0.0 * x[:, 0], line_mesh, basis_1d)
    eta = l2_project(lambda x: 6.0 + 0.0 * x[:, 0], line_mesh, basis_1d)
    b = l2_project(lambda x: x[:, 0] ** 2, line_mesh, basis_1d)
    np.testing.assert_allclose(reconstruct_btheta(h, eta, b).coeffs, 3.0 * b.coeffs, rtol=1e-14)


def test_dry_fix_zeroes_momentum(line_mesh, basis_1d):
    """Test that dry elements lose every momentum mode."""
    coeffs = np.zeros((line_mesh.n_elements, basis_1d.n_basis, 3))
    coeffs[:, 0, 0] = 1.0
    coeffs[:, :, 1] = 0.3
    coeffs[2, 0, 0] = 1e-8
    fixed = dry_fix(DGField(line_mesh, basis_1d, coeffs), LimiterConfig(dry_tol=1e-6))
    np.testing.assert_array_equal(fixed.coeffs[2, :, 1], 0.0)
    np.testing.assert_array_equal(fixed.coeffs[3, :, 1], 0.3)


@pytest.mark.parametrize("problem_id", ["ex4_1_step", "ex4_1_bumps"])
def test_tvb_leaves_lake_at_rest_untouched(problem_id):
    """Test that a discrete lake at rest is never limited."""
    problem = get_problem(problem_id)
    lo, hi = problem.domain[0]
    mesh = interval_mesh(lo, hi, 50, problem.boundary)
    state, bottom = project_initial(problem, mesh, build_basis(1, 2))
    limited = tvb_limit(state, bottom, LimiterConfig(m_tvb=0.0))
    np.testing.assert_array_equal(limited.coeffs, state.coeffs)


def test_tvb_leaves_2d_lake_at_rest_untouched():
    """Test the triangle limiter on the Gaussian-mound lake at rest."""
    problem = get_problem("ex4_6_rest2d")
    mesh = rectangle_mesh((-1.0, 1.0), (-1.0, 1.0), 8, 8, problem.boundary)
    state, bottom = project_initial(problem, mesh, build_basis(2, 2))
    limited = tvb_limit(state, bottom, LimiterConfig(m_tvb=0.0))
    np.testing.assert_array_equal(limited.coeffs, state.coeffs)


def test_tvb_preserves_averages_across_a_dam():
    """Test that limiting the dam break changes slopes but not cell averages."""
    problem = get_problem("ex4_4_dam")
    mesh = interval_mesh(-1.0, 1.0, 41, problem.boundary)
    state, bottom = project_initial(problem, mesh, build_basis(1, 2))
    limited = tvb_limit(state, bottom, LimiterConfig(m_tvb=0.0))
    np.testing.assert_allclose(limited.cell_averages(), state.cell_averages(), rtol=1e-14, atol=1e-14)
    changed = np.flatnonzero(np.any(limited.coeffs != state.coeffs, axis=(1, 2)))
    assert changed.size > 0
    centers = mesh.centroids[changed, 0]
    assert np.any(np.abs(centers) < 0.1)


def test_tvb_keeps_linear_data_in_the_interior(line_mesh, basis_1d):
    """Test that a linear state is unchanged away from the outflow ends."""

    def linear(x):
        xs = x[:, 0]
        return np.stack([2.0 + xs, 0.5 + xs, 3.0 + 2.0 * xs], axis=1)

    state = l2_project(linear, line_mesh, basis_1d)
    limited = tvb_limit(state, _flat_bottom(line_mesh, basis_1d), LimiterConfig(m_tvb=0.0))
    np.testing.assert_allclose(limited.coeffs[1:-1], state.coeffs[1:-1], atol=1e-13)


def test_tvb_triangles_preserve_averages(square_mesh, basis_2d):
    """Test the triangle limiter on a discontinuous depth."""

    def jump(x):
        h = np.where(x[:, 0] + 0.3 * x[:, 1] < 0.55, 3.0, 1.0)
        zero = np.zeros_like(h)
        return np.stack([h, 0.1 * h, zero, 2.0 * h], axis=1)

    state = l2_project(jump, square_mesh, basis_2d)
    limited = tvb_limit(state, _flat_bottom(square_mesh, basis_2d), LimiterConfig(m_tvb=0.0))
    np.testing.assert_allclose(limited.cell_averages(), state.cell_averages(), rtol=1e-13, atol=1e-13)
    assert np.any(limited.coeffs != state.coeffs)


def test_stage_limiter_restores_positivity(line_mesh, basis_1d):
    """Test the PP stage: nonnegative depth, flat surface and recorded metrics."""
    coeffs = np.zeros((line_mesh.n_elements, basis_1d.n_basis, 3))
    coeffs[:, 0, 0] = 1.0
    coeffs[:, 0, 2] = 2.0
    coeffs[4, 2, 0] = 4.0
    state = DGField(line_mesh, basis_1d, coeffs)
    bottom = l2_project(lambda x: 0.1 * x[:, 0], line_mesh, basis_1d)
    metrics = MetricsCollector()
    limiter = StageLimiter(LimiterConfig(tvb_enabled=False), 1.0, metrics)

    new_state, new_bottom = limiter(state, bottom)

    assert new_state.pp_values()[:, :, 0].min() >= -1e-14
    np.testing.assert_allclose(
        new_state.coeffs[:, :, 0] + new_bottom.coeffs[:, :, 0],
        state.coeffs[:, :, 0] + bottom.coeffs[:, :, 0],
        atol=1e-15,
    )
    collected = metrics.get_metrics()
    assert collected["pp_activations"] == 1
    assert collected["min_depth_pp"] >= -1e-14


def test_stage_limiter_dry_mode_on_dry_bed():
    """Test limiting of the partially dry dam break initial data."""
    problem = get_problem("ex4_5_dry")
    mesh = interval_mesh(-1.0, 1.0, 40, problem.boundary)
    state, bottom = project_initial(problem, mesh, build_basis(1, 2))
    limiter = StageLimiter(LimiterConfig(dry_mode=True), 1.0, MetricsCollector())

    new_state, new_bottom = limiter(state, bottom)

    pp = new_state.pp_values()
    assert pp[:, :, 0].min() >= -1e-13
    assert pp[:, :, -1].min() >= -1e-13
    dry = new_state.cell_averages()[:, 0] < 1e-6
    np.testing.assert_array_equal(new_state.coeffs[dry, :, 1], 0.0)
    np.testing.assert_allclose(new_state.cell_averages(), state.cell_averages(), atol=1e-13)


def _dipping_depth(mesh, basis):
    coeffs = np.zeros((mesh.n_elements, basis.n_basis))
    coeffs[:, 0] = 1.0
    coeffs[3] = [1.0, 0.0, 4.0]
    coeffs[6] = [0.5, 1.5, 0.0]
    return DGField(mesh, basis, coeffs)


def test_pp_limit_is_idempotent(line_mesh, basis_1d):
    """Test that limiting an already limited pair changes nothing."""
    h = _dipping_depth(line_mesh, basis_1d)
    eta = h.with_coeffs(3.0 * h.coeffs + 0.2 * np.sin(np.arange(h.coeffs.size)).reshape(h.coeffs.shape))
    eta.coeffs[:, 0, 0] = np.abs(eta.coeffs[:, 0, 0])
    once = pp_limit(h, eta)
    twice = pp_limit(once[0], once[1])
    assert np.any(once[2] < 1.0)
    np.testing.assert_allclose(twice[0].coeffs, once[0].coeffs, rtol=0.0, atol=1e-14)
    np.testing.assert_allclose(twice[1].coeffs, once[1].coeffs, rtol=0.0, atol=1e-14)


def test_pp_limit_scales_lake_at_rest_pair_together(line_mesh, basis_1d):
    """Test eta = C1 h gives lambda_h = lambda_eta and eta_hat = C1 h_hat."""
    c1 = 4.0
    h = _dipping_depth(line_mesh, basis_1d)
    eta = h.with_coeffs(c1 * h.coeffs)
    h_hat, eta_hat, lam_h, lam_eta = pp_limit(h, eta)
    assert np.any(lam_h < 1.0)
    np.testing.assert_allclose(lam_eta, lam_h, rtol=1e-14)
    np.testing.assert_allclose(eta_hat.coeffs, c1 * h_hat.coeffs, rtol=1e-14, atol=1e-15)
    assert h_hat.pp_values().min() >= -1e-14
