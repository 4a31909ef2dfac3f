"""Numerical kernels: Ripa fluxes, limiters, time stepping, remap and mesh adaptation."""

from .limiters import StageLimiter, dry_fix, pp_limit, tvb_limit
from .mesh_adapt import MetricField, adaptation_metric, intersect, metric_from_hessian, move_mesh, recover_hessian
from .remap import RemapPlan, dg_interpolate, plan_remap, remap_state
from .ripa_model import residual, time_derivative, well_balanced_flux
from .time_integration import compute_dt, ssp_rk3_step

__all__ = [
    "StageLimiter",
    "dry_fix",
    "pp_limit",
    "tvb_limit",
    "MetricField",
    "adaptation_metric",
    "intersect",
    "metric_from_hessian",
    "move_mesh",
    "recover_hessian",
    "RemapPlan",
    "dg_interpolate",
    "plan_remap",
    "remap_state",
    "residual",
    "time_derivative",
    "well_balanced_flux",
    "compute_dt",
    "ssp_rk3_step",
]
