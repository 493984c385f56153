"""simulate and norms: one evolution run and the norm report of a stored trace"""
from typing import Optional

import typer
from rich.console import Console
from rich.table import Table

from hfb_cli.commands.options import ConfigOption, OutOption, SeedOption, finish, progress_flag
from hfb_cli.core.commands.base import CommandFactory
from hfb_cli.core.errors import error_handler
from hfb_cli.core.physics.norms import NormReport

console = Console()


def norm_table(report: NormReport, title: str) -> Table:
    table = Table(title=title)
    table.add_column("Norm", style="cyan")
    table.add_column("Value", style="green", justify="right")
    for key, value in report.as_row().items():
        table.add_row(key, "-" if value is None else f"{value:.6e}")
    return table


@error_handler
def simulate(
    ctx: typer.Context,
    config: Optional[str] = ConfigOption,
    out: Optional[str] = OutOption,
    seed: Optional[int] = SeedOption,
):
    """Evolve the configured initial data and write trace, snapshots, conserved quantities and norms"""
    result = CommandFactory.create("simulate").execute(config, out, seed, progress=progress_flag(ctx))
    output = finish(result)
    conserved = output.trace.metadata.get("conserved") or []
    if conserved:
        first, last = conserved[0], conserved[-1]
        drift = abs(last["energy"] - first["energy"]) / max(abs(first["energy"]), 1e-300)
        console.print(f"mass {first['mass']:.12f} -> {last['mass']:.12f}, relative energy drift {drift:.3e}")
    console.print(norm_table(output.norms, f"Norms on [0, {output.norms.T:g})"))
    console.print(f"Run directory: [bold]{output.run_dir}[/bold]")


@error_handler
def norms(
    trace_path: str = typer.Argument(..., help="Trace file (.hfbt) written by simulate"),
    config: Optional[str] = ConfigOption,
    out: Optional[str] = OutOption,
):
    """Evaluate the composite norms of a stored trace"""
    result = CommandFactory.create("norms").execute(trace_path, config, out)
    report, run_dir = finish(result)
    console.print(norm_table(report, f"Norms of {trace_path}"))
    console.print(f"Written to [bold]{run_dir / 'norms.csv'}[/bold]")
