"""Tests for Hessian recovery, metrics and the mesh mover."""

from unittest.mock import patch

import numpy as np
import pytest

from core.domain.dg import build_basis, l2_project
from core.domain.mesh import interval_mesh, rectangle_mesh
from core.domain.problem import AdaptConfig
from core.domain.problems import get_problem, project_initial
from core.exceptions import MetricError
from core.numerics import mesh_adapt
from core.numerics.mesh_adapt import (
    MetricField,
    adaptation_metric,
    element_density_ratio,
    intersect,
    metric_from_hessian,
    move_mesh,
    recover_hessian,
    recover_hessian_from_samples,
    smooth_metric,
)
from core.utils.logging import MetricsCollector


def _uniform_metric(mesh, value=1.0):
    return MetricField(np.tile(value * np.eye(mesh.dim), (mesh.n_elements, 1, 1)))


def test_hessian_of_quadratic_1d(line_mesh):
    """Test d2/dx2 x^2 = 2 on every segment, ends included."""
    x = line_mesh.centroids[:, 0]
    H = recover_hessian_from_samples(x ** 2, line_mesh)
    np.testing.assert_allclose(H[:, 0, 0], 2.0, rtol=1e-10)


def test_hessian_of_quadratic_2d():
    """Test the recovered Hessian of x^2 + 3xy + y^2 from a P2 field."""
    mesh = rectangle_mesh((0.0, 1.0), (0.0, 1.0), 6, 6, "reflective")
    field = l2_project(lambda x: x[:, 0] ** 2 + 3.0 * x[:, 0] * x[:, 1] + x[:, 1] ** 2, mesh, build_basis(2, 2))
    H = recover_hessian(field)
    interior = np.all(mesh.neighbors >= 0, axis=1)
    np.testing.assert_allclose(H[interior], np.broadcast_to([[2.0, 3.0], [3.0, 2.0]], H[interior].shape), atol=1e-8)


def test_hessian_of_linear_data_vanishes(square_mesh):
    """Test that linear samples give a zero Hessian."""
    c = square_mesh.centroids
    H = recover_hessian_from_samples(1.0 + 2.0 * c[:, 0] - c[:, 1], square_mesh)
    np.testing.assert_allclose(H, 0.0, atol=1e-9)


@pytest.mark.parametrize(
    "mesh, factor",
    [
        (rectangle_mesh((0.0, 1.0), (0.0, 1.0), 3, 3), 2.0 ** 1.5 - 1.0),
        (interval_mesh(0.0, 1.0, 7), 2.0 ** 2.5 - 1.0),
    ],
)
def test_beta_for_uniform_hessian(mesh, factor):
    """Test the closed-form regularization for |H| = lambda I."""
    lam = 3.0
    H = np.tile(lam * np.eye(mesh.dim), (mesh.n_elements, 1, 1))
    metric = metric_from_hessian(H, mesh)
    beta = factor * lam
    assert metric.beta == pytest.approx(beta, rel=1e-9)
    expected = (beta + lam) ** (1.0 - mesh.dim / (mesh.dim + 4.0))
    np.testing.assert_allclose(metric.matrices, np.broadcast_to(expected * np.eye(mesh.dim), metric.matrices.shape), rtol=1e-9)


def test_beta_equation_holds_for_random_hessians(square_mesh):
    """Test that beta doubles the weighted det(|H|)^(1/3) mass."""
    rng = np.random.default_rng(11)
    A = rng.normal(size=(square_mesh.n_elements, 2, 2))
    H = A + np.swapaxes(A, 1, 2)
    metric = metric_from_hessian(H, square_mesh)
    eig = np.abs(np.linalg.eigvalsh(H))
    area = square_mesh.measures
    lhs = np.sum(area * np.prod(metric.beta + eig, axis=1) ** (1.0 / 3.0))
    rhs = 2.0 * np.sum(area * np.prod(eig, axis=1) ** (1.0 / 3.0))
    assert lhs == pytest.approx(rhs, rel=1e-9)
    assert np.all(np.linalg.eigvalsh(metric.matrices) > 0.0)


@pytest.mark.parametrize(
    "mesh",
    [rectangle_mesh((0.0, 1.0), (0.0, 1.0), 4, 4), interval_mesh(0.0, 1.0, 16)],
    ids=["2d", "1d"],
)
def test_beta_solve_over_wide_hessian_range(mesh):
    """Test the root solve for curvatures spanning twelve decades."""
    rng = np.random.default_rng(3)
    scale = 10.0 ** rng.uniform(-6.0, 6.0, size=mesh.n_elements)
    A = rng.normal(size=(mesh.n_elements, mesh.dim, mesh.dim))
    H = scale[:, None, None] * (A + np.swapaxes(A, 1, 2))
    metric = metric_from_hessian(H, mesh)
    expo = 2.0 / (mesh.dim + 4)
    eig = np.abs(np.linalg.eigvalsh(H))
    lhs = np.sum(mesh.measures * np.prod(metric.beta + eig, axis=1) ** expo)
    rhs = 2.0 * np.sum(mesh.measures * np.prod(eig, axis=1) ** expo)
    assert lhs == pytest.approx(rhs, rel=1e-9)
    assert np.all(np.isfinite(metric.matrices))


def test_beta_solve_tolerance_is_accepted_by_brentq(square_mesh):
    """Test that the relative tolerance handed to brentq is not below 4 eps."""
    with patch.object(mesh_adapt, "brentq", wraps=mesh_adapt.brentq) as solver:
        metric_from_hessian(np.tile(np.eye(2), (square_mesh.n_elements, 1, 1)), square_mesh)
    assert solver.call_args.kwargs["rtol"] >= 4.0 * np.finfo(float).eps


def test_zero_hessian_uses_beta_floor(square_mesh):
    """Test the degenerate case |H| = 0."""
    metric = metric_from_hessian(np.zeros((square_mesh.n_elements, 2, 2)), square_mesh, beta_floor=1e-12)
    assert metric.beta == 1e-12
    np.testing.assert_allclose(metric.density(), metric.density()[0])


def test_intersect_takes_the_larger_metric():
    """Test diag(1, 1) with diag(4, 1/4) -> diag(4, 1)."""
    M1 = MetricField(np.eye(2)[None])
    M2 = MetricField(np.diag([4.0, 0.25])[None])
    np.testing.assert_allclose(intersect(M1, M2).matrices[0], np.diag([4.0, 1.0]), atol=1e-14)
    np.testing.assert_allclose(intersect(M1, M2, delta=0.5).matrices[0], np.diag([2.0, 1.0]), atol=1e-14)


def test_intersect_rejects_indefinite_metrics():
    """Test that a non-SPD input names the element."""
    good = MetricField(np.tile(np.eye(2), (3, 1, 1)))
    bad = good.matrices.copy()
    bad[2] = np.diag([1.0, -1.0])
    with pytest.raises(MetricError) as exc_info:
        intersect(good, MetricField(bad))
    assert exc_info.value.details["element"] == 2


def test_smoothing_keeps_constant_metric(square_mesh):
    """Test that neighbor averaging leaves a uniform metric alone."""
    metric = MetricField(np.tile(np.diag([2.0, 5.0]), (square_mesh.n_elements, 1, 1)), beta=0.1)
    smoothed = smooth_metric(metric, square_mesh, 3)
    np.testing.assert_allclose(smoothed.matrices, metric.matrices)
    assert smoothed.beta == 0.1


def test_adaptation_metric_concentrates_over_bumps():
    """Test that the metric is denser where the depth varies."""
    problem = get_problem("ex4_1_bumps")
    lo, hi = problem.domain[0]
    mesh = interval_mesh(lo, hi, 80, problem.boundary)
    state, bottom = project_initial(problem, mesh, build_basis(1, 2))
    metric = adaptation_metric(state, bottom, AdaptConfig(delta=0.5))
    x = mesh.centroids[:, 0]
    density = metric.density()
    assert np.all(np.linalg.eigvalsh(metric.matrices) > 0.0)
    assert density[(x > 0.3) & (x < 0.5)].mean() > 3.0 * density[x > 1.0].mean()


def test_adaptation_metric_ignores_gravity_at_rest():
    """Test that ln(E) only shifts with g when the fluid is still."""
    problem = get_problem("ex4_1_bumps")
    lo, hi = problem.domain[0]
    mesh = interval_mesh(lo, hi, 40, problem.boundary)
    state, bottom = project_initial(problem, mesh, build_basis(1, 2))
    cfg = AdaptConfig(delta=0.25)
    np.testing.assert_allclose(
        adaptation_metric(state, bottom, cfg, g=1.0).matrices,
        adaptation_metric(state, bottom, cfg, g=9.81).matrices,
        rtol=1e-8,
    )


def test_uniform_metric_does_not_move_nodes(square_mesh):
    """Test that the uniform mesh is already optimal for a constant metric."""
    new = move_mesh(square_mesh, _uniform_metric(square_mesh), AdaptConfig(delta=1.0))
    np.testing.assert_allclose(new, square_mesh.vertices, atol=1e-12)


def test_mover_converges_to_equidistribution_1d():
    """Test the two-segment mesh under M = (1, 16) moving its middle node to 0.8."""
    mesh = interval_mesh(0.0, 1.0, 2, "outflow")
    reference = mesh.vertices.copy()
    metric = MetricField(np.array([[[1.0]], [[16.0]]]))
    cfg = AdaptConfig(delta=1.0)
    for _ in range(40):
        vertices = move_mesh(mesh, metric, cfg, reference_vertices=reference)
        mesh = mesh.with_vertices(vertices)
    assert mesh.vertices[1, 0] == pytest.approx(0.8, abs=1e-3)
    np.testing.assert_array_equal(mesh.vertices[[0, 2], 0], [0.0, 1.0])


def test_mover_keeps_boundaries_and_positivity(square_mesh):
    """Test a peaked metric: fixed corners, sliding sides, no inverted elements."""
    c = square_mesh.centroids
    peak = 1.0 + 50.0 * np.exp(-30.0 * ((c[:, 0] - 0.4) ** 2 + (c[:, 1] - 0.6) ** 2))
    metric = MetricField(peak[:, None, None] * np.eye(2))
    new = move_mesh(square_mesh, metric, AdaptConfig(delta=1.0))
    moved = square_mesh.with_vertices(new)
    assert np.all(moved.jacobian_det > 0.0)
    fixed = square_mesh.topology.vertex_mobility == 0.0
    np.testing.assert_array_equal(new[fixed], square_mesh.vertices[fixed])
    assert not np.allclose(new, square_mesh.vertices)
    assert moved.total_measure == pytest.approx(1.0)


def test_rejected_movement_keeps_the_mesh(square_mesh):
    """Test that a mover that cannot keep measures positive returns the old nodes."""
    c = square_mesh.centroids
    metric = MetricField((1.0 + 20.0 * c[:, 0])[:, None, None] * np.eye(2))
    metrics = MetricsCollector()
    with patch("core.numerics.mesh_adapt._measures_positive", return_value=False):
        new = move_mesh(square_mesh, metric, AdaptConfig(delta=1.0), metrics=metrics)
    np.testing.assert_array_equal(new, square_mesh.vertices)
    assert metrics.get_metrics()["mover_rejections"] == 1


def test_element_density_ratio():
    """Test 1/|K| inside the band over outside."""
    mesh = interval_mesh(0.0, 1.0, 3).with_vertices(np.array([[0.0], [0.1], [0.2], [1.0]]))
    assert element_density_ratio(mesh, np.array([True, True, False])) == pytest.approx(8.0)
    assert element_density_ratio(mesh, np.zeros(3, dtype=bool)) == 1.0
