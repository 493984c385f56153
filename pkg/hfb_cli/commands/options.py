"""
Options shared by the CLI verbs and the helpers that turn a CommandResult
into console output and an exit code.
"""
from typing import Any, Dict, Optional

import typer
from rich.console import Console

from hfb_cli.core.commands.base import CommandResult

console = Console()

ConfigOption = typer.Option(None, "--config", "-c", help="Run configuration (YAML or JSON); defaults apply when omitted")
OutOption = typer.Option(None, "--out", "-o", help="Base directory for run directories (overrides output.out_dir)")
SeedOption = typer.Option(None, "--seed", "-s", min=0, help="Override the configured rng seed")


def root_options(ctx: typer.Context) -> Dict[str, Any]:
    """Flags given to the root callback; empty when a command runs standalone"""
    root = ctx.find_root()
    return root.obj if isinstance(root.obj, dict) else {}


def progress_flag(ctx: typer.Context) -> Optional[bool]:
    """--verbose forces progress bars; otherwise the config decides"""
    return True if root_options(ctx).get("verbose") else None


def finish(result: CommandResult[Any]) -> Any:
    """Return the value, or report the failure and exit with code 1"""
    if not result.success:
        console.print(f"[bold red]FAILED:[/bold red] {result.error}")
        raise typer.Exit(code=1)
    return result.value
