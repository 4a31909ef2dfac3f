"""Run configuration entities."""

from enum import Enum
from typing import Dict, List, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class MeshMode(str, Enum):
    """Mesh mode enumeration."""
    FIXED = "fixed"
    MOVING = "moving"


class ReferenceKind(str, Enum):
    """How errors are measured for a problem."""
    EXACT = "exact"    # initial data is the exact solution (lake at rest)
    FINE = "fine"      # fixed-mesh run at higher resolution
    NONE = "none"


class LimiterConfig(BaseModel):
    """Post-stage limiter settings."""

    m_tvb: float = Field(default=0.0, ge=0.0, description="TVB constant M in the modified minmod")
    dry_tol: float = Field(default=1e-6, gt=0.0, description="Dry-cell depth tolerance")
    dry_mode: bool = Field(default=False, description="Troubled-cell detection on h+b, limiting on (h, m, w, eta)")
    nu: float = Field(default=1.5, gt=1.0, description="Triangle minmod weight on neighbor differences")
    tvb_enabled: bool = Field(default=True, description="Apply the characteristic TVB limiter")
    pp_enabled: bool = Field(default=True, description="Apply the linear scaling positivity limiter")


class AdaptConfig(BaseModel):
    """Metric construction and mesh movement settings."""

    delta: float = Field(..., gt=0.0, description="Weight of the depth metric in the intersection")
    h_floor: float = Field(default=1e-6, gt=0.0, description="Floor inside ln(h)")
    energy_floor: float = Field(default=1e-12, gt=0.0, description="Floor inside ln(E)")
    beta_floor: float = Field(default=1e-12, gt=0.0, description="Lower bound of the metric regularization")
    smoothing_sweeps: int = Field(default=2, ge=0, description="Neighbor-averaging sweeps on the metric")
    mover_iterations: int = Field(default=5, ge=1, description="Damped energy-descent iterations per call")
    theta: float = Field(default=1.0 / 3.0, gt=0.0, le=0.5, description="Balance between alignment and equidistribution")
    p: float = Field(default=1.5, gt=1.0, description="Energy exponent")
    adapt_every: int = Field(default=1, ge=1, description="Steps between adaptations")
    remap_cfl: float = Field(default=0.18, gt=0.0, lt=1.0, description="Pseudo-time CFL constant C_p")


class StepControl(BaseModel):
    """Time stepping state and limits."""

    cfl: float = Field(..., gt=0.0, lt=1.0, description="CFL number")
    t: float = Field(default=0.0, ge=0.0, description="Current time")
    t_final: float = Field(..., ge=0.0, description="Final time")
    output_times: List[float] = Field(default_factory=list, description="Intermediate snapshot times")

    def next_stop(self) -> float:
        """Earliest output time strictly after t (t_final at the latest)."""
        later = [s for s in self.output_times if s > self.t + 1e-14 and s < self.t_final]
        return min(later) if later else self.t_final

    @property
    def finished(self) -> bool:
        return self.t >= self.t_final


class LakeAtRestSpec(BaseModel):
    """Still-water steady state: eta = C1 h and h + b = C2."""

    c1: float = Field(..., gt=0.0, description="Constant temperature theta")
    c2: float = Field(..., description="Constant free surface h + b")

    def check_wet(self, bottom_max: float) -> None:
        if not self.c2 > bottom_max:
            raise ValueError(f"free surface {self.c2} must exceed the bottom maximum {bottom_max}")


class ProblemConfig(BaseModel):
    """Fully resolved configuration of one run."""

    model_config = ConfigDict(use_enum_values=False)

    problem: str = Field(..., description="Registered problem id")
    dim: int = Field(..., ge=1, le=2, description="Spatial dimension")
    domain: List[Tuple[float, float]] = Field(..., description="Extents per axis")
    boundary: Dict[str, str] = Field(default_factory=dict, description="Boundary kind per domain side")
    n_elements: int = Field(..., ge=1, description="Element count N")
    degree: int = Field(default=2, description="Polynomial degree k")
    t_final: float = Field(..., ge=0.0, description="Final time")
    output_times: List[float] = Field(default_factory=list, description="Snapshot times before t_final")
    cfl: float = Field(..., gt=0.0, lt=1.0, description="CFL number")
    m_tvb: float = Field(default=0.0, ge=0.0, description="TVB constant")
    dry_mode: bool = Field(default=False, description="Dry-region TVB variant")
    delta: float = Field(..., gt=0.0, description="Metric intersection weight")
    mesh_mode: MeshMode = Field(default=MeshMode.MOVING, description="fixed or moving mesh")
    adapt_every: int = Field(default=1, ge=1, description="Steps between adaptations")
    gravity: float = Field(default=1.0, gt=0.0, description="Gravitational acceleration")
    dry_tol: float = Field(default=1e-6, gt=0.0, description="Dry tolerance")
    remap_cfl: float = Field(default=0.18, gt=0.0, lt=1.0, description="Pseudo-time CFL constant")
    smoothing_sweeps: int = Field(default=2, ge=0, description="Metric smoothing sweeps")
    mover_iterations: int = Field(default=5, ge=1, description="Mover iterations per adaptation")
    reference: ReferenceKind = Field(default=ReferenceKind.EXACT, description="Error reference")
    reference_refinement: int = Field(default=10, ge=1, description="Fine reference resolution factor")
    snapshot_every: int = Field(default=0, ge=0, description="Extra snapshot every n steps (0 = only output times)")
    dump_metric: bool = Field(default=False, description="Write per-element metric with snapshots")
    output_dir: str = Field(default="runs", description="Output directory")

    @field_validator("degree")
    @classmethod
    def validate_degree(cls, v):
        """Validate the polynomial degree."""
        if v not in (1, 2, 3):
            raise ValueError("degree must be 1, 2 or 3")
        return v

    @field_validator("problem")
    @classmethod
    def validate_problem(cls, v):
        """Problem id must be registered."""
        from .problems import PROBLEMS

        if v not in PROBLEMS:
            raise ValueError(f"unknown problem '{v}'; known: {sorted(PROBLEMS)}")
        return v

    @model_validator(mode="after")
    def validate_domain(self):
        """Domain extents match the dimension and are non-empty."""
        if len(self.domain) != self.dim:
            raise ValueError(f"domain has {len(self.domain)} axes for dim={self.dim}")
        for lo, hi in self.domain:
            if not hi > lo:
                raise ValueError(f"empty domain extent ({lo}, {hi})")
        self.output_times = sorted(t for t in self.output_times if 0.0 < t < self.t_final)
        return self

    def limiter_config(self) -> LimiterConfig:
        return LimiterConfig(m_tvb=self.m_tvb, dry_tol=self.dry_tol, dry_mode=self.dry_mode)

    def adapt_config(self) -> AdaptConfig:
        return AdaptConfig(
            delta=self.delta,
            h_floor=self.dry_tol,
            smoothing_sweeps=self.smoothing_sweeps,
            mover_iterations=self.mover_iterations,
            adapt_every=self.adapt_every,
            remap_cfl=self.remap_cfl,
        )

    def step_control(self) -> StepControl:
        return StepControl(cfl=self.cfl, t_final=self.t_final, output_times=list(self.output_times))

    def refined(self, factor: int) -> "ProblemConfig":
        """Fixed-mesh configuration at factor x the resolution (reference runs)."""
        return self.model_copy(
            update={
                "n_elements": self.n_elements * factor * (factor if self.dim == 2 else 1),
                "mesh_mode": MeshMode.FIXED,
                "reference": ReferenceKind.NONE,
                "snapshot_every": 0,
                "output_times": [],
                "dump_metric": False,
            }
        )
