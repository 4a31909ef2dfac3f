"""Shared fixtures for the solver tests."""

import numpy as np
import pytest

from config.settings import Settings
from core.domain.dg import build_basis
from core.domain.mesh import interval_mesh, rectangle_mesh


@pytest.fixture
def test_settings(tmp_path):
    """Settings pinned to the test environment with outputs under tmp_path."""
    return Settings(ENVIRONMENT="test", LOG_LEVEL="WARNING", OUTPUT_DIR=str(tmp_path / "runs"))


@pytest.fixture
def line_mesh():
    """Ten uniform segments on (0, 1) with outflow ends."""
    return interval_mesh(0.0, 1.0, 10, "outflow")


@pytest.fixture
def periodic_line_mesh():
    return interval_mesh(0.0, 1.0, 16, "periodic")


@pytest.fixture
def square_mesh():
    """4x4 quads split into 32 triangles on the unit square, reflective walls."""
    return rectangle_mesh((0.0, 1.0), (0.0, 1.0), 4, 4, "reflective")


@pytest.fixture
def periodic_square_mesh():
    return rectangle_mesh((0.0, 1.0), (0.0, 1.0), 4, 4, "periodic")


@pytest.fixture(params=[1, 2, 3])
def degree(request):
    return request.param


@pytest.fixture
def basis_1d():
    return build_basis(1, 2)


@pytest.fixture
def basis_2d():
    return build_basis(2, 2)


def perturbed_vertices(mesh, amplitude: float, seed: int = 7) -> np.ndarray:
    """Random displacement of the movable coordinates, scaled by the smallest element height."""
    rng = np.random.default_rng(seed)
    shift = rng.uniform(-1.0, 1.0, size=mesh.vertices.shape) * amplitude * float(mesh.heights.min())
    return mesh.vertices + shift * mesh.topology.vertex_mobility


@pytest.fixture
def perturb():
    return perturbed_vertices
