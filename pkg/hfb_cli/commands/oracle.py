"""oracle: the cross-check ledger"""
from typing import List, Optional

import typer
from rich.console import Console
from rich.table import Table

from hfb_cli.commands.options import ConfigOption, OutOption, SeedOption, finish
from hfb_cli.core.commands.base import CommandFactory
from hfb_cli.core.errors import error_handler
from hfb_cli.core.experiments.oracles import OracleLedger

console = Console()


def render(ledger: OracleLedger) -> None:
    table = Table(title="Oracle ledger")
    table.add_column("Oracle", style="cyan")
    table.add_column("n", justify="right")
    table.add_column("Residual", justify="right")
    table.add_column("Tolerance", justify="right")
    table.add_column("Result")
    for entry in ledger.entries:
        verdict = "[green]pass[/green]" if entry.passed else f"[red]FAIL[/red] {entry.message}".rstrip()
        table.add_row(entry.name, str(entry.n), f"{entry.residual:.3e}", f"{entry.tolerance:.0e}", verdict)
    console.print(table)


@error_handler
def oracle(
    config: Optional[str] = ConfigOption,
    out: Optional[str] = OutOption,
    seed: Optional[int] = SeedOption,
    only: Optional[List[str]] = typer.Option(None, "--only", help="Run only the named oracle (repeatable)"),
):
    """Check the assemblers, series and schemes against independent references"""
    result = CommandFactory.create("oracle").execute(config, out, seed, only)
    if result.value is not None:
        ledger, run_dir = result.value
        render(ledger)
        console.print(f"Run directory: [bold]{run_dir}[/bold]")
    finish(result)
