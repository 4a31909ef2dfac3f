"""Tests for the conservative DG interpolation between moving meshes."""

import numpy as np
import pytest

from core.domain.dg import DGField, build_basis, integrate, l2_project
from core.domain.mesh import MeshBlend, interval_mesh, rectangle_mesh
from core.domain.problems import get_problem, project_initial
from core.exceptions import MeshTanglingError
from core.numerics.limiters import scale_to_nonnegative
from core.numerics.remap import (
    _edge_velocities,
    dg_interpolate,
    interpolate_coefficients,
    plan_remap,
    remap_state,
)


def _moved(mesh, perturb, amplitude=0.2):
    target = mesh.with_vertices(perturb(mesh, amplitude))
    return target, MeshBlend.between(mesh, target)


def _smooth(x):
    r = x[:, 0] + (x[:, 1] if x.shape[1] > 1 else 0.0)
    return 1.0 + 0.5 * np.sin(2.0 * np.pi * x[:, 0]) * np.cos(np.pi * r)


@pytest.fixture(params=["1d", "2d"])
def moving_case(request, perturb):
    """(old mesh, new mesh, blend, basis) for a segment mesh and a triangulation."""
    if request.param == "1d":
        mesh = interval_mesh(0.0, 1.0, 12, "outflow")
        basis = build_basis(1, 2)
    else:
        mesh = rectangle_mesh((0.0, 1.0), (0.0, 1.0), 5, 5, "reflective")
        basis = build_basis(2, 2)
    target, mesh_blend = _moved(mesh, perturb)
    return mesh, target, mesh_blend, basis


def test_identity_plan(line_mesh, basis_1d):
    """Test that an unchanged mesh skips the transport."""
    same = line_mesh.with_vertices(line_mesh.vertices.copy())
    plan = plan_remap(MeshBlend.between(line_mesh, same), basis_1d)
    assert plan.identity
    assert plan.n_steps == 1
    coeffs = np.random.default_rng(0).normal(size=(line_mesh.n_elements, basis_1d.n_basis, 2))
    np.testing.assert_array_equal(interpolate_coefficients(coeffs, plan, basis_1d), coeffs)


def test_plan_respects_pseudo_time_cfl(moving_case):
    """Test sub-step lengths sum to one and obey the pseudo-time CFL bound."""
    mesh, target, mesh_blend, basis = moving_case
    plan = plan_remap(mesh_blend, basis, remap_cfl=0.18)
    intervals = plan.intervals()
    assert len(intervals) == plan.n_steps
    assert sum(length for _, length in intervals) == pytest.approx(1.0)
    assert intervals[-1][0] + intervals[-1][1] == pytest.approx(1.0)
    a_min = min(mesh.heights.min(), target.heights.min())
    assert plan.max_normal_speed > 0.0
    assert plan.dvarsigma * plan.max_normal_speed <= 0.18 * a_min * (1.0 + 1e-12)


def test_plan_speed_bounds_every_blend_state(moving_case):
    """Test that |Xdot . n| on intermediate blended meshes never exceeds the planned speed."""
    mesh, _, mesh_blend, basis = moving_case
    plan = plan_remap(mesh_blend, basis)
    xdot = _edge_velocities(mesh_blend, basis)
    for varsigma in np.linspace(0.0, 1.0, 9):
        normals = mesh_blend.mesh_at(varsigma).edge_normals
        speed = np.abs(np.einsum("epd,ed->ep", xdot, normals)).max()
        assert speed <= plan.max_normal_speed * (1.0 + 1e-12)
    if mesh.dim == 1:
        endpoint = np.abs(np.einsum("epd,ed->ep", xdot, mesh.edge_normals)).max()
        assert plan.max_normal_speed == pytest.approx(endpoint, rel=1e-14)


def test_constants_are_preserved(moving_case):
    """Test that a constant field stays constant on the new mesh."""
    mesh, target, mesh_blend, basis = moving_case
    plan = plan_remap(mesh_blend, basis)
    field = DGField(mesh, basis, np.zeros((mesh.n_elements, basis.n_basis)))
    field.coeffs[:, 0, 0] = 3.0 / basis.phi0
    moved = dg_interpolate(field, plan)
    assert moved.mesh.topology is target.topology
    np.testing.assert_allclose(moved.coeffs[:, 0, 0], 3.0 / basis.phi0, rtol=1e-12)
    np.testing.assert_allclose(moved.coeffs[:, 1:, 0], 0.0, atol=1e-12)


def test_mass_is_conserved(moving_case):
    """Test that the domain integral survives the transfer."""
    mesh, target, mesh_blend, basis = moving_case
    field = l2_project(_smooth, mesh, basis)
    moved = dg_interpolate(field, plan_remap(mesh_blend, basis), use_pp=True, new_mesh=target)
    assert integrate(moved).sum() == pytest.approx(integrate(field).sum(), rel=1e-13)


def test_transfer_is_linear_without_positivity(moving_case):
    """Test I(a f + g) = a I(f) + I(g)."""
    mesh, _, mesh_blend, basis = moving_case
    plan = plan_remap(mesh_blend, basis)
    f = l2_project(_smooth, mesh, basis)
    g = l2_project(lambda x: x[:, 0] ** 2 - 0.3, mesh, basis)
    combined = f.with_coeffs(2.5 * f.coeffs + g.coeffs)
    lhs = dg_interpolate(combined, plan).coeffs
    rhs = 2.5 * dg_interpolate(f, plan).coeffs + dg_interpolate(g, plan).coeffs
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_transfer_is_accurate_for_smooth_data(moving_case):
    """Test that the transferred field is close to the projection on the new mesh."""
    mesh, target, mesh_blend, basis = moving_case
    moved = dg_interpolate(l2_project(_smooth, mesh, basis), plan_remap(mesh_blend, basis))
    direct = l2_project(_smooth, target, basis)
    np.testing.assert_allclose(moved.cell_averages(), direct.cell_averages(), atol=5e-3)


def test_positivity_is_kept(moving_case):
    """Test that a nonnegative field with a dry region stays nonnegative."""
    mesh, _, mesh_blend, basis = moving_case
    field = l2_project(lambda x: np.maximum(0.0, 0.5 - x[:, 0]), mesh, basis)
    coeffs = field.coeffs.copy()
    coeffs[:, :, 0], _ = scale_to_nonnegative(coeffs[:, :, 0], basis)
    field = field.with_coeffs(coeffs)
    moved = dg_interpolate(field, plan_remap(mesh_blend, basis), use_pp=True)
    assert moved.pp_values().min() >= -1e-13


def test_scaling_commutes_with_transfer(moving_case):
    """Test I(c f) = c I(f) with the positivity limiter active."""
    mesh, _, mesh_blend, basis = moving_case
    plan = plan_remap(mesh_blend, basis)
    f = l2_project(lambda x: np.abs(x[:, 0] - 0.45), mesh, basis)
    scaled = dg_interpolate(f.with_coeffs(4.0 * f.coeffs), plan, use_pp=True).coeffs
    np.testing.assert_allclose(scaled, 4.0 * dg_interpolate(f, plan, use_pp=True).coeffs, atol=1e-12)


@pytest.mark.parametrize("problem_id", ["ex4_1_bumps", "ex4_6_rest2d"])
def test_remap_state_keeps_lake_at_rest(problem_id, perturb):
    """Test that a remapped lake at rest keeps a flat surface, eta = C1 h and m = 0."""
    problem = get_problem(problem_id)
    if problem.dim == 1:
        lo, hi = problem.domain[0]
        mesh = interval_mesh(lo, hi, 30, problem.boundary)
    else:
        mesh = rectangle_mesh(problem.domain[0], problem.domain[1], 6, 6, problem.boundary)
    basis = build_basis(problem.dim, 2)
    state, bottom = project_initial(problem, mesh, basis)
    target, mesh_blend = _moved(mesh, perturb, 0.25)
    rest = problem.lake_at_rest

    new_state, new_bottom = remap_state(state, bottom, plan_remap(mesh_blend, basis), target)

    surface = new_state.coeffs[:, :, 0] + new_bottom.coeffs[:, :, 0]
    np.testing.assert_allclose(surface[:, 0], rest.c2 / basis.phi0, rtol=1e-12)
    np.testing.assert_allclose(surface[:, 1:], 0.0, atol=1e-12)
    np.testing.assert_allclose(new_state.coeffs[:, :, -1], rest.c1 * new_state.coeffs[:, :, 0], rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(new_state.coeffs[:, :, 1:-1], 0.0, atol=1e-14)
    assert new_state.mesh is target


def test_tangled_blend_is_reported(line_mesh, basis_1d):
    """Test that a target mesh with an inverted element aborts the transfer."""
    vertices = line_mesh.vertices.copy()
    vertices[1, 0] = 0.25
    target = line_mesh.with_vertices(vertices, validate=False)
    with pytest.raises(MeshTanglingError) as exc_info:
        plan_remap(MeshBlend.between(line_mesh, target), basis_1d)
    assert exc_info.value.details["element"] == 1


_TRIALS = 100
_TRIAL_BASES = {}


def _trial_case(dim, seed, perturb):
    """Random small mesh pair, degree and generator for one property trial."""
    rng = np.random.default_rng(seed)
    degree = int(rng.integers(1, 4))
    if dim == 1:
        mesh = interval_mesh(0.0, 1.0, int(rng.integers(4, 10)), "outflow")
    else:
        n = int(rng.integers(2, 4))
        mesh = rectangle_mesh((0.0, 1.0), (0.0, 1.0), n, n, "reflective")
    basis = _TRIAL_BASES.setdefault((dim, degree), build_basis(dim, degree))
    target = mesh.with_vertices(perturb(mesh, rng.uniform(0.05, 0.3), seed=int(rng.integers(2 ** 31))))
    plan = plan_remap(MeshBlend.between(mesh, target), basis)
    return mesh, target, plan, basis, rng


def _random_field(mesh, basis, rng, nonnegative=False):
    coeffs = rng.normal(size=(mesh.n_elements, basis.n_basis))
    if nonnegative:
        coeffs[:, 0] = rng.uniform(0.0, 2.0, size=mesh.n_elements) / basis.phi0
        coeffs[rng.random(mesh.n_elements) < 0.2, 0] = 0.0
        coeffs, _ = scale_to_nonnegative(coeffs, basis)
    return DGField(mesh, basis, coeffs)


@pytest.mark.parametrize("dim", [1, 2])
def test_randomized_transfer_properties(dim, perturb):
    """Test mass, constants, linearity, positivity and scaling over random fields and mesh blends."""
    for seed in range(_TRIALS):
        mesh, target, plan, basis, rng = _trial_case(dim, seed, perturb)

        f = _random_field(mesh, basis, rng, nonnegative=True)
        moved = dg_interpolate(f, plan, use_pp=True, new_mesh=target)
        assert integrate(moved).sum() == pytest.approx(integrate(f).sum(), rel=1e-12, abs=1e-14), seed
        assert moved.pp_values().min() >= -1e-13, seed

        c = rng.uniform(0.1, 2.0)
        constant = np.zeros((mesh.n_elements, basis.n_basis))
        constant[:, 0] = c / basis.phi0
        kept = dg_interpolate(DGField(mesh, basis, constant), plan).coeffs[:, :, 0]
        np.testing.assert_allclose(kept[:, 0] * basis.phi0, c, rtol=1e-13, err_msg=str(seed))
        np.testing.assert_allclose(kept[:, 1:], 0.0, atol=1e-13 * c, err_msg=str(seed))

        g, k = _random_field(mesh, basis, rng), _random_field(mesh, basis, rng)
        a = rng.uniform(-3.0, 3.0)
        lhs = dg_interpolate(g.with_coeffs(a * g.coeffs + k.coeffs), plan).coeffs
        rhs = a * dg_interpolate(g, plan).coeffs + dg_interpolate(k, plan).coeffs
        np.testing.assert_allclose(lhs, rhs, rtol=0.0, atol=1e-12 * max(1.0, np.abs(rhs).max()), err_msg=str(seed))

        scale = rng.uniform(0.0, 10.0)
        scaled = dg_interpolate(f.with_coeffs(scale * f.coeffs), plan, use_pp=True).coeffs
        expected = scale * dg_interpolate(f, plan, use_pp=True).coeffs
        np.testing.assert_allclose(scaled, expected, rtol=0.0, atol=1e-12 * max(1.0, np.abs(expected).max()), err_msg=str(seed))
