"""Adaptive time step and the three-stage SSP Runge-Kutta update."""

from typing import Callable, Optional, Tuple

import numpy as np

from ..domain.dg import DGField
from ..domain.mesh import min_element_height
from ..domain.problem import StepControl
from ..utils.logging import LogCategory, create_logger
from .ripa_model import (
    DEFAULT_DRY_TOL,
    DEFAULT_GRAVITY,
    edge_traces,
    max_wave_speed,
    sound_speed,
    time_derivative,
    velocities,
)

logger = create_logger(__name__, LogCategory.SOLVER)

StageHook = Callable[[DGField, DGField], Tuple[DGField, DGField]]


def max_signal_speed(state: DGField, g: float = DEFAULT_GRAVITY, dry_tol: float = DEFAULT_DRY_TOL) -> float:
    """Largest |u.n| + c over edge traces and |u| + c over element quadrature points."""
    mesh = state.mesh
    U_l, U_r = edge_traces(state)
    n = mesh.edge_normals[:, None, :]
    Uq = state.quadrature_values()
    interior = np.linalg.norm(velocities(Uq, dry_tol), axis=-1) + sound_speed(Uq, g, dry_tol)
    return float(
        max(
            max_wave_speed(U_l, n, g, dry_tol).max(initial=0.0),
            max_wave_speed(U_r, n, g, dry_tol).max(initial=0.0),
            interior.max(initial=0.0),
        )
    )


def compute_dt(
    state: DGField,
    ctl: StepControl,
    g: float = DEFAULT_GRAVITY,
    dry_tol: float = DEFAULT_DRY_TOL,
) -> float:
    """cfl * min element height / max wave speed, clipped to the next output time."""
    remaining = ctl.next_stop() - ctl.t
    speed = max_signal_speed(state, g, dry_tol)
    if speed <= 0.0:
        logger.debug("zero wave speed; stepping to the next stop", dt=remaining)
        return remaining
    dt = ctl.cfl * min_element_height(state.mesh) / speed
    return min(dt, remaining)


def ssp_rk3_step(
    state: DGField,
    bottom: DGField,
    dt: float,
    limiter: Optional[StageHook] = None,
    g: float = DEFAULT_GRAVITY,
    dry_tol: float = DEFAULT_DRY_TOL,
) -> Tuple[DGField, DGField]:
    """One SSP-RK3 step; the limiter runs after every stage and may correct the bottom."""

    def limited(s: DGField, b: DGField) -> Tuple[DGField, DGField]:
        return limiter(s, b) if limiter is not None else (s, b)

    c0 = state.coeffs
    s1 = state.with_coeffs(c0 + dt * time_derivative(state, bottom, g, dry_tol))
    s1, b1 = limited(s1, bottom)

    s2 = state.with_coeffs(0.75 * c0 + 0.25 * (s1.coeffs + dt * time_derivative(s1, b1, g, dry_tol)))
    s2, b2 = limited(s2, b1)

    s3 = state.with_coeffs(c0 / 3.0 + 2.0 / 3.0 * (s2.coeffs + dt * time_derivative(s2, b2, g, dry_tol)))
    return limited(s3, b2)
