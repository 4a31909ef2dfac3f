"""Registered test problems and initial-data projection.

Every problem supplies a bottom ``b(x)`` and primitive initial data
``(h, u[, v], theta)`` as functions of physical points ``(P, dim)``; the
conserved vector is ``(h, hu[, hv], h theta)``.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from ..exceptions import ValidationError
from .dg import DGField, ReferenceBasis, l2_project
from .mesh import Mesh
from .problem import LakeAtRestSpec, ReferenceKind

PointFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ProblemDefinition:
    """Static description of one test problem and its default run settings."""

    problem_id: str
    dim: int
    domain: Tuple[Tuple[float, float], ...]
    boundary: Dict[str, str]
    bottom: PointFunction
    primitive: PointFunction          # (P, dim) -> (P, dim + 2): h, u[, v], theta
    t_final: float
    cfl: float
    delta: float
    n_elements: int
    description: str
    m_tvb: float = 0.0
    dry_mode: bool = False
    output_times: Tuple[float, ...] = ()
    lake_at_rest: Optional[LakeAtRestSpec] = None
    reference: ReferenceKind = ReferenceKind.FINE

    @property
    def n_comp(self) -> int:
        return self.dim + 2

    def conserved(self, x: np.ndarray) -> np.ndarray:
        """Conserved initial data (P, n_comp) at physical points."""
        prim = np.asarray(self.primitive(x), dtype=float)
        h = prim[:, 0]
        cons = np.empty_like(prim)
        cons[:, 0] = h
        cons[:, 1:-1] = h[:, None] * prim[:, 1:-1]
        cons[:, -1] = h * prim[:, -1]
        return cons

    def default_config(self) -> dict:
        """Registry defaults as ProblemConfig field values."""
        return {
            "problem": self.problem_id,
            "dim": self.dim,
            "domain": [tuple(d) for d in self.domain],
            "boundary": dict(self.boundary),
            "n_elements": self.n_elements,
            "t_final": self.t_final,
            "output_times": list(self.output_times),
            "cfl": self.cfl,
            "m_tvb": self.m_tvb,
            "dry_mode": self.dry_mode,
            "delta": self.delta,
            "reference": self.reference,
        }


def output_variables(dim: int) -> Tuple[str, ...]:
    """Quantities compared in error reports."""
    return ("h+b", "hu", "htheta") if dim == 1 else ("h+b", "hu", "hv", "htheta")


# -- 1D data -----------------------------------------------------------------

def _cos_bump(x, amplitude, center, lo, hi):
    return np.where((x > lo) & (x < hi), amplitude * (np.cos(10.0 * np.pi * (x - center)) + 1.0), 0.0)


def _step_bottom(x):
    x = x[:, 0]
    return np.where((x > 0.3) & (x < 0.7), 1.0, 0.0)


def _two_bumps(x):
    x = x[:, 0]
    return _cos_bump(x, 0.85, -0.9, -1.0, -0.8) + _cos_bump(x, 1.25, 0.4, 0.3, 0.5)


def _rest_1d(surface, theta, bottom):
    def primitive(x):
        h = surface - bottom(x)
        return np.stack([h, np.zeros_like(h), np.full_like(h, theta)], axis=1)

    return primitive


def _smooth_bottom(x):
    return np.sin(np.pi * x[:, 0]) ** 2


def _smooth_primitive(x):
    x = x[:, 0]
    h = 5.0 + np.exp(np.sin(2.0 * np.pi * x))
    u = np.sin(np.cos(2.0 * np.pi * x)) / h
    theta = np.sin(2.0 * np.pi * x) + 2.0
    return np.stack([h, u, theta], axis=1)


PERTURBATION_EPS_1D = 0.01


def _perturbation_primitive(temperature_pulse: bool):
    eps = PERTURBATION_EPS_1D

    def primitive(x):
        b = _two_bumps(x)
        xs = x[:, 0]
        pulse = (xs > -1.5) & (xs < -1.4)
        h = 6.0 - b + np.where(pulse, eps, 0.0)
        theta = np.full_like(h, 4.0)
        if temperature_pulse:
            theta = np.where(pulse, 24.0 / (6.0 + eps), theta)
        return np.stack([h, np.zeros_like(h), theta], axis=1)

    return primitive


def _dam_bottom(x):
    x = x[:, 0]
    return _cos_bump(x, 0.5, -0.3, -0.4, -0.2) + _cos_bump(x, 0.75, 0.3, 0.2, 0.4)


def _dam_primitive(x):
    b = _dam_bottom(x)
    left = x[:, 0] < 0.0
    h = np.where(left, 5.0 - b, 2.0 - b)
    theta = np.where(left, 3.0, 5.0)
    return np.stack([h, np.zeros_like(h), theta], axis=1)


def _dry_bottom(x):
    x = x[:, 0]
    return _cos_bump(x, 2.0, -0.3, -0.4, -0.2) + _cos_bump(x, 0.5, 0.3, 0.2, 0.4)


def _dry_primitive(x):
    b = _dry_bottom(x)
    left = x[:, 0] < 0.0
    h = np.where(left, 5.0 - b, np.maximum(0.0, 1.0 - b))
    theta = np.where(left, 1.0, 5.0)
    return np.stack([h, np.zeros_like(h), theta], axis=1)


# -- 2D data -----------------------------------------------------------------

def _gaussians_bottom(x):
    xs, ys = x[:, 0], x[:, 1]
    left = 0.5 * np.exp(-100.0 * ((xs + 0.5) ** 2 + (ys + 0.5) ** 2))
    right = 0.6 * np.exp(-100.0 * ((xs - 0.5) ** 2 + (ys - 0.5) ** 2))
    return np.where(xs < 0.0, left, right)


def _gaussians_primitive(x):
    h = 3.0 - _gaussians_bottom(x)
    zero = np.zeros_like(h)
    return np.stack([h, zero, zero, np.full_like(h, 4.0 / 3.0)], axis=1)


PERTURBATION_EPS_2D = 0.1


def _hump_bottom(x):
    return 3.0 * np.exp(-5.0 * (x[:, 0] - 0.9) ** 2 - 50.0 * (x[:, 1] - 0.5) ** 2)


def _hump_primitive(x):
    eps = PERTURBATION_EPS_2D
    b = _hump_bottom(x)
    pulse = (x[:, 0] > 0.05) & (x[:, 0] < 0.15)
    h = 6.0 - b + np.where(pulse, eps, 0.0)
    theta = np.where(pulse, 24.0 / (6.0 + eps), 4.0)
    zero = np.zeros_like(h)
    return np.stack([h, zero, zero, theta], axis=1)


_OUTFLOW_1D = {"xmin": "outflow", "xmax": "outflow"}
_PERIODIC_1D = {"xmin": "periodic", "xmax": "periodic"}


def _build_registry() -> Dict[str, ProblemDefinition]:
    problems: List[ProblemDefinition] = [
        ProblemDefinition(
            problem_id="ex4_1_step",
            dim=1,
            domain=((0.0, 1.0),),
            boundary=_OUTFLOW_1D,
            bottom=_step_bottom,
            primitive=_rest_1d(2.0, 10.0, _step_bottom),
            t_final=1.0,
            cfl=0.18,
            delta=0.1,
            n_elements=50,
            description="Lake at rest over a discontinuous bottom step",
            lake_at_rest=LakeAtRestSpec(c1=10.0, c2=2.0),
            reference=ReferenceKind.EXACT,
        ),
        ProblemDefinition(
            problem_id="ex4_1_bumps",
            dim=1,
            domain=((-2.0, 2.0),),
            boundary=_OUTFLOW_1D,
            bottom=_two_bumps,
            primitive=_rest_1d(6.0, 4.0, _two_bumps),
            t_final=1.0,
            cfl=0.18,
            delta=0.1,
            n_elements=100,
            description="Lake at rest over two smooth bumps",
            lake_at_rest=LakeAtRestSpec(c1=4.0, c2=6.0),
            reference=ReferenceKind.EXACT,
        ),
        ProblemDefinition(
            problem_id="ex4_2_smooth",
            dim=1,
            domain=((0.0, 1.0),),
            boundary=_PERIODIC_1D,
            bottom=_smooth_bottom,
            primitive=_smooth_primitive,
            t_final=0.04,
            cfl=0.18,
            delta=0.1,
            n_elements=80,
            m_tvb=1000.0,
            description="Smooth periodic flow over a sinusoidal hump (accuracy)",
        ),
        ProblemDefinition(
            problem_id="ex4_3_data1",
            dim=1,
            domain=((-4.0, 2.0),),
            boundary=_OUTFLOW_1D,
            bottom=_two_bumps,
            primitive=_perturbation_primitive(temperature_pulse=False),
            t_final=0.4,
            cfl=0.18,
            delta=0.1,
            n_elements=300,
            description="Small depth pulse on a lake at rest over two bumps",
        ),
        ProblemDefinition(
            problem_id="ex4_3_data2",
            dim=1,
            domain=((-4.0, 2.0),),
            boundary=_OUTFLOW_1D,
            bottom=_two_bumps,
            primitive=_perturbation_primitive(temperature_pulse=True),
            t_final=0.4,
            cfl=0.18,
            delta=0.1,
            n_elements=300,
            description="Depth pulse with compensating temperature (standing contact)",
        ),
        ProblemDefinition(
            problem_id="ex4_4_dam",
            dim=1,
            domain=((-1.0, 1.0),),
            boundary=_OUTFLOW_1D,
            bottom=_dam_bottom,
            primitive=_dam_primitive,
            t_final=0.14,
            cfl=0.18,
            delta=0.1,
            n_elements=200,
            description="Dam break with a temperature jump over two bumps",
        ),
        ProblemDefinition(
            problem_id="ex4_5_dry",
            dim=1,
            domain=((-1.0, 1.0),),
            boundary=_OUTFLOW_1D,
            bottom=_dry_bottom,
            primitive=_dry_primitive,
            t_final=0.3,
            cfl=0.15,
            delta=0.1,
            n_elements=200,
            dry_mode=True,
            description="Dam break onto a partially dry bed",
        ),
        ProblemDefinition(
            problem_id="ex4_6_rest2d",
            dim=2,
            domain=((-1.0, 1.0), (-1.0, 1.0)),
            boundary={s: "periodic" for s in ("xmin", "xmax", "ymin", "ymax")},
            bottom=_gaussians_bottom,
            primitive=_gaussians_primitive,
            t_final=0.12,
            cfl=0.1,
            delta=1.0,
            n_elements=400,
            description="2D lake at rest over two Gaussian mounds",
            lake_at_rest=LakeAtRestSpec(c1=4.0 / 3.0, c2=3.0),
            reference=ReferenceKind.EXACT,
        ),
        ProblemDefinition(
            problem_id="ex4_7_hump2d",
            dim=2,
            domain=((-2.0, 2.0), (0.0, 1.0)),
            boundary={s: "reflective" for s in ("xmin", "xmax", "ymin", "ymax")},
            bottom=_hump_bottom,
            primitive=_hump_primitive,
            t_final=0.24,
            output_times=(0.16,),
            cfl=0.1,
            delta=1.0,
            n_elements=3600,
            description="2D pulse propagating over an elliptical hump",
        ),
    ]
    return {p.problem_id: p for p in problems}


PROBLEMS: Dict[str, ProblemDefinition] = _build_registry()


def get_problem(problem_id: str) -> ProblemDefinition:
    """Look up a registered problem."""
    try:
        return PROBLEMS[problem_id]
    except KeyError:
        raise ValidationError(
            f"unknown problem '{problem_id}'; known: {sorted(PROBLEMS)}", field="problem"
        ) from None


def project_initial(problem: ProblemDefinition, mesh: Mesh, basis: ReferenceBasis) -> Tuple[DGField, DGField]:
    """Project bottom and conserved initial data onto the DG space.

    Lake-at-rest problems are built discretely as ``h = C2 - b_h`` and
    ``eta = C1 h`` so the projected state is an exact discrete steady state.
    """
    bottom = l2_project(problem.bottom, mesh, basis)
    state = l2_project(problem.conserved, mesh, basis)
    rest = problem.lake_at_rest
    if rest is not None:
        coeffs = np.zeros_like(state.coeffs)
        coeffs[:, 0, 0] = rest.c2 / basis.phi0
        coeffs[:, :, 0] -= bottom.coeffs[:, :, 0]
        coeffs[:, :, -1] = rest.c1 * coeffs[:, :, 0]
        state = state.with_coeffs(coeffs)
    return state, bottom
