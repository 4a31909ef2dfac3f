"""CLI commands implementation using Typer."""

from pathlib import Path
from typing import Dict, List, Optional

import typer
from rich.console import Console
from rich.table import Table

from adapters.config import resolve_config
from adapters.output.writers import FileSnapshotWriter
from config.settings import get_settings
from core import __version__
from core.domain.problem import MeshMode
from core.domain.problems import PROBLEMS
from core.domain.report import ConvergenceTable, ErrorReport
from core.exceptions import RipaSolverError
from core.usecases.convergence import ConvergenceUseCase
from core.usecases.simulation import SimulationUseCase
from core.utils.logging import setup_structured_logging

# Initialize console for rich output
console = Console()

# Create main CLI app
app = typer.Typer(
    name="ripa-mmdg",
    help="Well-balanced moving-mesh DG solver for the Ripa model",
    add_completion=False,
)

DEFAULT_CONVERGENCE_N = [40, 80, 160, 320]


def _configure_logging(log_level: Optional[str]) -> None:
    settings = get_settings()
    setup_structured_logging(
        log_level=(log_level or settings.LOG_LEVEL).upper(),
        enable_json=settings.json_logs,
        enable_console=True,
    )


def _fail(error: RipaSolverError) -> None:
    console.print(f"[red]✗ {error.error_code.value}: {error.message}[/red]")
    details = {k: v for k, v in error.details.items() if k != "context" and v is not None}
    if details:
        console.print(f"[red]  {details}[/red]")
    raise typer.Exit(error.exit_code)


def _error_table(report: ErrorReport) -> Table:
    table = Table(title=f"Errors of {report.problem} (N={report.n_elements}, t={report.t:g}, {report.reference})")
    table.add_column("Variable", style="cyan")
    table.add_column("L1", style="green", justify="right")
    table.add_column("Linf", style="yellow", justify="right")
    for name in report.variables:
        table.add_row(name, f"{report.l1[name]:.3e}", f"{report.linf[name]:.3e}")
    return table


def _order_table(table_data: ConvergenceTable) -> Table:
    table = Table(title=f"Convergence of {table_data.problem} ({table_data.mesh_mode} mesh)")
    table.add_column("N", style="cyan", justify="right")
    for name in table_data.variables:
        table.add_column(f"{name} L1", justify="right")
        table.add_column("order", style="magenta", justify="right")
    for row in table_data.rows:
        cells = [str(row.n_elements)]
        for name in table_data.variables:
            order = row.order_l1.get(name)
            cells += [f"{row.l1[name]:.3e}", "-" if order is None else f"{order:.2f}"]
        table.add_row(*cells)
    return table


@app.command("run")
def run(
    problem: Optional[str] = typer.Option(None, "--problem", "-p", help="Registered problem id"),
    n_elements: Optional[int] = typer.Option(None, "--N", help="Element count"),
    degree: Optional[int] = typer.Option(None, "--degree", "-k", help="Polynomial degree (1-3)"),
    t_final: Optional[float] = typer.Option(None, "--tfinal", help="Final time"),
    mesh: Optional[MeshMode] = typer.Option(None, "--mesh", help="fixed or moving mesh"),
    cfl: Optional[float] = typer.Option(None, "--cfl", help="CFL number"),
    m_tvb: Optional[float] = typer.Option(None, "--mtvb", help="TVB constant M"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory"),
    config_file: Optional[Path] = typer.Option(None, "--config", "-c", help="key = value config file"),
    adapt_every: Optional[int] = typer.Option(None, "--adapt-every", help="Steps between adaptations"),
    log_level: Optional[str] = typer.Option(None, "--log-level", help="DEBUG, INFO, WARNING, ..."),
):
    """Run one problem and write its snapshots, errors and manifest."""
    _configure_logging(log_level)
    overrides: Dict[str, object] = {
        "n_elements": n_elements,
        "degree": degree,
        "t_final": t_final,
        "mesh_mode": mesh,
        "cfl": cfl,
        "m_tvb": m_tvb,
        "adapt_every": adapt_every,
        "output_dir": str(out) if out is not None else None,
    }
    try:
        config = resolve_config(problem, config_file, overrides)
        output_dir = Path(config.output_dir) if out is not None else Path(config.output_dir) / config.problem
        config = config.model_copy(update={"output_dir": str(output_dir)})

        with console.status(f"[bold green]Running {config.problem} (N={config.n_elements}, {config.mesh_mode.value} mesh)..."):
            result = SimulationUseCase(config, FileSnapshotWriter(output_dir)).execute()
    except RipaSolverError as e:
        _fail(e)
        return

    console.print(
        f"[green]✅ {config.problem} reached t={result.t:g} in {result.steps} steps[/green] "
        f"(min element measure {result.diagnostics.get('min_element_measure', float('nan')):.3e})"
    )
    if result.report is not None:
        console.print(_error_table(result.report))
    console.print(f"📁 Outputs in {output_dir}")


@app.command("problems")
def problems():
    """List the registered problems."""
    table = Table(title="Registered Problems")
    table.add_column("Id", style="cyan")
    table.add_column("Dim", justify="right")
    table.add_column("Domain")
    table.add_column("t_final", justify="right")
    table.add_column("CFL", justify="right")
    table.add_column("N", justify="right")
    table.add_column("Boundary")
    table.add_column("Description", style="green")
    for problem in PROBLEMS.values():
        domain = " x ".join(f"({lo:g}, {hi:g})" for lo, hi in problem.domain)
        boundary = ", ".join(sorted(set(problem.boundary.values())))
        table.add_row(
            problem.problem_id,
            str(problem.dim),
            domain,
            f"{problem.t_final:g}",
            f"{problem.cfl:g}",
            str(problem.n_elements),
            boundary,
            problem.description,
        )
    console.print(table)


@app.command("convergence")
def convergence(
    problem: str = typer.Option("ex4_2_smooth", "--problem", "-p", help="Registered problem id"),
    n_list: List[int] = typer.Option(DEFAULT_CONVERGENCE_N, "--n", help="Resolutions (repeat the option)"),
    degree: Optional[int] = typer.Option(None, "--degree", "-k", help="Polynomial degree (1-3)"),
    t_final: Optional[float] = typer.Option(None, "--tfinal", help="Final time"),
    mesh: MeshMode = typer.Option(MeshMode.FIXED, "--mesh", help="fixed or moving mesh"),
    refinement: Optional[int] = typer.Option(None, "--refinement", help="Reference resolution factor"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory"),
    log_level: Optional[str] = typer.Option(None, "--log-level", help="DEBUG, INFO, WARNING, ..."),
):
    """Refinement study against a fine fixed-mesh reference; writes convergence.csv."""
    _configure_logging(log_level)
    try:
        base = resolve_config(
            problem,
            overrides={
                "degree": degree,
                "t_final": t_final,
                "mesh_mode": mesh,
                "reference_refinement": refinement,
            },
        )
        output_dir = out if out is not None else Path(base.output_dir) / f"{base.problem}_convergence"
        with console.status(f"[bold green]Refinement study {sorted(n_list)}..."):
            table = ConvergenceUseCase(base, n_list, FileSnapshotWriter(output_dir)).run()
    except RipaSolverError as e:
        _fail(e)
        return

    console.print(_order_table(table))
    console.print(f"📁 convergence.csv in {output_dir}")


@app.command("version")
def version():
    """Show version information."""
    console.print(f"ripa-mmdg {__version__}")


def create_cli_app():
    """Create and return the CLI application."""
    return app


if __name__ == "__main__":
    app()
