"""sweep: the same initial data evolved for every N of the list"""
from typing import Optional

import typer
from rich.console import Console
from rich.table import Table

from hfb_cli.commands.options import ConfigOption, OutOption, SeedOption, finish, progress_flag
from hfb_cli.core.commands.base import CommandFactory
from hfb_cli.core.errors import error_handler
from hfb_cli.core.experiments.sweep import SUMMARY_NORMS, SweepReport

console = Console()


def _fmt(value: Optional[float], spec: str = ".4e") -> str:
    return "-" if value is None else format(value, spec)


def render(report: SweepReport) -> None:
    table = Table(title="N sweep")
    table.add_column("N", style="cyan", justify="right")
    for name in SUMMARY_NORMS:
        table.add_column(name, justify="right")
    table.add_column("runtime [s]", style="magenta", justify="right")
    table.add_column("status")
    for big_n, entry in report.entries.items():
        if not entry.ok:
            table.add_row(f"{big_n:g}", *["-"] * len(SUMMARY_NORMS), f"{entry.runtime:.2f}", f"[red]{entry.error}[/red]")
            continue
        final = entry.final()
        status = "dropped" if big_n in report.dropped else "ok"
        table.add_row(f"{big_n:g}", *[_fmt(getattr(final, name)) for name in SUMMARY_NORMS], f"{entry.runtime:.2f}", status)
    console.print(table)

    summary = Table(title="Across N")
    summary.add_column("Norm", style="cyan")
    summary.add_column("max/min", justify="right")
    summary.add_column("log-log slope", justify="right")
    for name in SUMMARY_NORMS:
        summary.add_row(name, _fmt(report.ratio(name), ".3f"), _fmt(report.slope(name), "+.3f"))
    console.print(summary)


@error_handler
def sweep(
    ctx: typer.Context,
    config: Optional[str] = ConfigOption,
    out: Optional[str] = OutOption,
    seed: Optional[int] = SeedOption,
):
    """Evolve across big_n_list and report how the norms depend on N"""
    result = CommandFactory.create("sweep").execute(config, out, seed, progress=progress_flag(ctx))
    if result.value is not None:
        report, run_dir = result.value
        render(report)
        console.print(f"Run directory: [bold]{run_dir}[/bold]")
    finish(result)
