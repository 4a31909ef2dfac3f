"""Error report entities."""

import math
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, field_validator


class ErrorReport(BaseModel):
    """L1 / L-infinity errors of the output variables of one run."""

    problem: str = Field(..., description="Problem id")
    n_elements: int = Field(..., ge=1, description="Element count N")
    t: float = Field(..., ge=0.0, description="Time the errors were measured at")
    reference: str = Field(..., description="exact | fine")
    variables: List[str] = Field(..., description="Compared quantities, in column order")
    l1: Dict[str, float] = Field(default_factory=dict, description="L1 error per variable")
    linf: Dict[str, float] = Field(default_factory=dict, description="L-infinity error per variable")

    @field_validator("l1", "linf")
    @classmethod
    def validate_nonnegative(cls, v):
        """Errors are nonnegative."""
        for name, value in v.items():
            if value < 0.0 or math.isnan(value):
                raise ValueError(f"error of {name} must be a nonnegative number, got {value}")
        return v

    def max_error(self) -> float:
        values = list(self.l1.values()) + list(self.linf.values())
        return max(values) if values else 0.0

    def csv_rows(self) -> List[List[str]]:
        """Rows ``variable, L1, Linf`` in variable order."""
        return [[name, repr(self.l1[name]), repr(self.linf[name])] for name in self.variables]


class ConvergenceRow(BaseModel):
    """One resolution of a refinement study."""

    n_elements: int
    l1: Dict[str, float]
    linf: Dict[str, float]
    order_l1: Dict[str, Optional[float]] = Field(default_factory=dict)
    order_linf: Dict[str, Optional[float]] = Field(default_factory=dict)


class ConvergenceTable(BaseModel):
    """Errors and observed orders over a refinement sequence."""

    problem: str
    mesh_mode: str
    variables: List[str]
    rows: List[ConvergenceRow] = Field(default_factory=list)

    def last_orders(self, norm: str = "l1") -> Dict[str, Optional[float]]:
        if len(self.rows) < 2:
            return {name: None for name in self.variables}
        return getattr(self.rows[-1], f"order_{norm}")


def observed_order(e_coarse: float, e_fine: float, n_coarse: int, n_fine: int, dim: int = 1) -> Optional[float]:
    """log(e_i / e_{i+1}) / log(h_i / h_{i+1}) with h ~ N^(-1/dim); None when undefined."""
    if e_coarse <= 0.0 or e_fine <= 0.0 or n_fine == n_coarse:
        return None
    return math.log(e_coarse / e_fine) / math.log((n_fine / n_coarse) ** (1.0 / dim))


def convergence_orders(reports: List[ErrorReport], mesh_mode: str = "fixed", dim: int = 1) -> ConvergenceTable:
    """Build the order table from reports sorted by increasing resolution."""
    if not reports:
        raise ValueError("no reports to tabulate")
    reports = sorted(reports, key=lambda r: r.n_elements)
    table = ConvergenceTable(problem=reports[0].problem, mesh_mode=mesh_mode, variables=list(reports[0].variables))
    previous: Optional[ErrorReport] = None
    for report in reports:
        row = ConvergenceRow(n_elements=report.n_elements, l1=dict(report.l1), linf=dict(report.linf))
        if previous is not None:
            for name in report.variables:
                row.order_l1[name] = observed_order(
                    previous.l1[name], report.l1[name], previous.n_elements, report.n_elements, dim
                )
                row.order_linf[name] = observed_order(
                    previous.linf[name], report.linf[name], previous.n_elements, report.n_elements, dim
                )
        table.rows.append(row)
        previous = report
    return table
