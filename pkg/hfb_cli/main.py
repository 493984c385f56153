#!/usr/bin/env python3
from typing import Optional

import typer
from rich.console import Console

from hfb_cli import __version__
from hfb_cli.commands import config, oracle, simulate, sweep, verify
from hfb_cli.core.commands import run_commands  # noqa: F401  registers the commands
from hfb_cli.core.errors import ErrorHandler
from hfb_cli.core.runtime import Runtime

# Initialize the Typer app
app = typer.Typer(
    name="hfb-cli",
    help="Spectral simulator and space-time diagnostics for the Bosonic HFB system",
    add_completion=False,
    no_args_is_help=True,
)

console = Console()

# Register the commands
app.command("simulate")(simulate.simulate)
app.command("norms")(simulate.norms)
app.command("sweep")(sweep.sweep)
app.command("oracle")(oracle.oracle)
app.command("validate-config")(config.validate_config)
app.add_typer(verify.app, name="verify")


@app.callback()
def main(
    ctx: typer.Context,
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Show informational messages and progress bars"),
    serial: bool = typer.Option(False, "--serial", help="Single-threaded FFTs and ensembles"),
    threads: Optional[int] = typer.Option(None, "--threads", "-t", min=1, help="Worker threads for FFTs and ensembles"),
):
    """
    Main entry point for the HFB CLI
    """
    ctx.obj = {"verbose": verbose}
    ErrorHandler().show_info = verbose
    Runtime().configure(serial=serial, threads=threads)


@app.command("version")
def version():
    """Show the current version of the CLI tool"""
    from importlib.metadata import PackageNotFoundError, version as get_version

    try:
        ver = get_version("hfb-cli")
    except PackageNotFoundError:
        ver = __version__
    console.print(f"HFB CLI version: {ver}")


if __name__ == "__main__":
    app()
