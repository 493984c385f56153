"""verify: numerical checks of the space-time estimates on seeded ensembles"""
from typing import Any, Dict, Optional

import typer
from rich.console import Console
from rich.table import Table

from hfb_cli.commands.options import ConfigOption, OutOption, SeedOption, finish
from hfb_cli.core.commands.base import CommandFactory
from hfb_cli.core.errors import error_handler
from hfb_cli.core.experiments.lemmas import LemmaCheck

app = typer.Typer(help="Check an estimate on a seeded ensemble across refinement levels")
console = Console()

EnsembleOption = typer.Option(None, "--ensemble", "-e", min=1, help="Samples per refinement level")


def render(check: LemmaCheck) -> None:
    table = Table(title=f"{check.lemma} (ensemble {check.ensemble})")
    table.add_column("Level", style="cyan", justify="right")
    table.add_column("max LHS/RHS", justify="right")
    for level, value in check.max_ratios.items():
        table.add_row(f"{level:g}", f"{value:.6g}")
    console.print(table)
    flat = "[green]flat[/green]" if check.trend_flat() else "[yellow]not flat[/yellow]"
    console.print(f"log-log slope {check.slope:+.4f} ({flat}), spread {check.spread:.3f}")


def _run(lemma: str, config: Optional[str], out: Optional[str], seed: Optional[int], **overrides: Any) -> None:
    values: Dict[str, Any] = {key: value for key, value in overrides.items() if value is not None}
    result = CommandFactory.create("verify").execute(lemma, config, out, seed, values)
    check, run_dir = finish(result)
    render(check)
    console.print(f"Run directory: [bold]{run_dir}[/bold]")


@app.command("duhamel")
@error_handler
def duhamel(
    b: Optional[float] = typer.Option(None, "--b", help="X^b exponent in (0, 1)"),
    ensemble: Optional[int] = EnsembleOption,
    config: Optional[str] = ConfigOption,
    out: Optional[str] = OutOption,
    seed: Optional[int] = SeedOption,
):
    """Energy estimate for the windowed Duhamel integral"""
    _run("duhamel", config, out, seed, b=b, ensemble=ensemble)


@app.command("strichartz")
@error_handler
def strichartz(
    delta: Optional[float] = typer.Option(None, "--delta", help="Dispersive exponent loss"),
    p: Optional[float] = typer.Option(None, "--p", help="Time Lebesgue exponent"),
    ensemble: Optional[int] = EnsembleOption,
    config: Optional[str] = ConfigOption,
    out: Optional[str] = OutOption,
    seed: Optional[int] = SeedOption,
):
    """Strichartz estimate for the free two-body flow in d=3"""
    _run("strichartz", config, out, seed, delta=delta, p=p, ensemble=ensemble)


@app.command("quartertime")
@error_handler
def quartertime(
    weighted: Optional[bool] = typer.Option(None, "--weighted/--plain", help="Use the generalized sigma-hat weights"),
    ensemble: Optional[int] = EnsembleOption,
    config: Optional[str] = ConfigOption,
    out: Optional[str] = OutOption,
    seed: Optional[int] = SeedOption,
):
    """Quarter time derivative along the diagonal"""
    _run("quartertime", config, out, seed, weighted=weighted, ensemble=ensemble)


@app.command("mlogm")
@error_handler
def mlogm(
    config: Optional[str] = ConfigOption,
    out: Optional[str] = OutOption,
    seed: Optional[int] = SeedOption,
):
    """M log M bound of the frequency-localized integral"""
    _run("mlogm", config, out, seed)


@app.command("sobolev-angle")
@error_handler
def sobolev_angle(
    p: Optional[float] = typer.Option(None, "--p", help="Inner Lebesgue exponent"),
    q: Optional[float] = typer.Option(None, "--q", help="Outer Lebesgue exponent"),
    alpha: Optional[float] = typer.Option(None, "--alpha", help="Sobolev order"),
    ensemble: Optional[int] = EnsembleOption,
    config: Optional[str] = ConfigOption,
    out: Optional[str] = OutOption,
    seed: Optional[int] = SeedOption,
):
    """Sobolev embedding along a slanted plane"""
    _run("sobolev-angle", config, out, seed, sobolev_p=p, sobolev_q=q, sobolev_alpha=alpha, ensemble=ensemble)
