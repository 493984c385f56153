"""validate-config: report every cross-field inequality of a configuration"""
from typing import Optional

from rich.console import Console
from rich.table import Table

from hfb_cli.commands.options import ConfigOption, finish
from hfb_cli.core.commands.base import CommandFactory
from hfb_cli.core.errors import error_handler

console = Console()


@error_handler
def validate_config(config: Optional[str] = ConfigOption):
    """Check a run configuration without running anything"""
    result = CommandFactory.create("validate_config").execute(config)
    checks, info = result.value
    table = Table(title=f"Configuration {info['source']}")
    table.add_column("Inequality", style="cyan")
    table.add_column("Holds")
    table.add_column("Detail", style="magenta")
    for check in checks:
        table.add_row(check.inequality, "[green]yes[/green]" if check.passed else "[red]no[/red]", check.detail)
    console.print(table)
    console.print(f"config hash {info['hash'][:16]}")
    finish(result)
