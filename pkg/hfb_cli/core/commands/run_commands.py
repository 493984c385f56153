"""
Commands behind the CLI verbs. Each one loads the run configuration,
does the numerical work and writes its artifacts into the run directory.
"""
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple

from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn, TimeElapsedColumn

from hfb_cli.core.commands.base import CommandFactory, CommandResult, ConfigAwareCommand
from hfb_cli.core.config_manager import ConfigCheck, ConfigManager, RunConfig
from hfb_cli.core.errors import CommandError, NumericalBlowupError, ValidationError, log_info, log_warning
from hfb_cli.core.experiments.lemmas import (
    LEMMA_IDS,
    LemmaCheck,
    verify_duhamel,
    verify_mlogm,
    verify_quartertime,
    verify_sobolev_angle,
    verify_strichartz,
)
from hfb_cli.core.experiments.oracles import OracleLedger, oracle_suite
from hfb_cli.core.experiments.sweep import SweepReport, n_sweep
from hfb_cli.core.physics.conserved import CONSERVED_COLUMNS
from hfb_cli.core.physics.hfb_state import HFBState, instantiate, validate
from hfb_cli.core.physics.integrator import evolve
from hfb_cli.core.physics.norms import NormReport, composite_norms
from hfb_cli.core.physics.trace import SpaceTimeTrace
from hfb_cli.utils.serialization import load_trace, save_state, save_trace, write_csv, write_json

console = Console()


@contextmanager
def _progress(enabled: bool, label: str, total: int) -> Iterator[Callable[[int], None]]:
    """Yields an advance(completed) callback; a no-op when progress is off"""
    if not enabled:
        yield lambda completed: None
        return
    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TextColumn("{task.completed}/{task.total}"),
        TimeElapsedColumn(),
        console=console,
        transient=True,
    ) as progress:
        task = progress.add_task(label, total=total)
        yield lambda completed: progress.update(task, completed=completed)


def _show_progress(config: RunConfig, progress: Optional[bool]) -> bool:
    return config.output.progress if progress is None else progress


def write_norms(run_dir: Path, report: NormReport) -> Path:
    """norms.csv and norms.json; shared by simulate and norms so both emit the same bytes"""
    row = report.as_row()
    write_json(run_dir / "norms.json", row)
    return write_csv(run_dir / "norms.csv", [row], list(row))


@dataclass
class SimulationOutput:
    run_dir: Path
    trace: SpaceTimeTrace
    norms: NormReport
    files: List[Path] = field(default_factory=list)


@CommandFactory.register("simulate")
class SimulateCommand(ConfigAwareCommand):
    """Evolve the configured initial data and record trace, conserved quantities and norms"""

    def name(self) -> str:
        return "simulate"

    def description(self) -> str:
        return "Evolve (phi, Lambda, Gamma) and write trace, snapshots and norms"

    def execute(
        self,
        config_path: Optional[str] = None,
        out: Optional[str] = None,
        seed: Optional[int] = None,
        progress: Optional[bool] = None,
    ) -> CommandResult[SimulationOutput]:
        """
        Raises:
            ConfigurationError: config invalid
            NumericalBlowupError: after the partial trace and last good state are saved
        """
        config, run_dir = self.prepare(config_path, out, seed)
        grid = ConfigManager.grid(config)
        state = instantiate(config.initial, grid, config.potential, config.seed)
        report = validate(state)
        if not report.ok:
            worst = report.violations[0]
            raise ValidationError(
                f"Initial state violates {worst.name} (residual {worst.residual:.3e} > {worst.tolerance:.1e})",
                field="initial",
            )

        files = [save_state(state, run_dir / "state_initial.hfbs")]
        log_info(f"Evolving {config.scheme.steps} {config.scheme.scheme} steps on n={grid.n}, d={grid.d}")
        try:
            with _progress(_show_progress(config, progress), "simulate", config.scheme.steps) as advance:
                trace = evolve(state, config.scheme, on_step=lambda done, total: advance(done))
        except NumericalBlowupError as exc:
            self._save_partial(exc, run_dir, config)
            raise

        files.append(save_state(trace.final_state, run_dir / "state_final.hfbs"))
        files.append(save_trace(trace, run_dir / "trace.hfbt", config.potential))
        files.append(write_csv(run_dir / "conserved.csv", trace.metadata.get("conserved", []), CONSERVED_COLUMNS))
        norms = composite_norms(trace, config.norms, config.potential)
        files.append(write_norms(run_dir, norms))
        return CommandResult.ok(SimulationOutput(run_dir, trace, norms, files))

    @staticmethod
    def _save_partial(exc: NumericalBlowupError, run_dir: Path, config: RunConfig) -> None:
        if isinstance(exc.last_good, HFBState):
            save_state(exc.last_good, run_dir / "state_last_good.hfbs")
        if exc.partial_trace is not None:
            save_trace(exc.partial_trace, run_dir / "trace_partial.hfbt", config.potential)
            write_csv(run_dir / "conserved.csv", exc.partial_trace.metadata.get("conserved", []), CONSERVED_COLUMNS)
        log_warning(f"Partial output of the aborted run saved under {run_dir}")


@CommandFactory.register("norms")
class NormsCommand(ConfigAwareCommand):
    """Recompute the norm report of a stored trace"""

    def name(self) -> str:
        return "norms"

    def description(self) -> str:
        return "Evaluate the composite norms of a trace file"

    def execute(
        self,
        trace_path: str,
        config_path: Optional[str] = None,
        out: Optional[str] = None,
    ) -> CommandResult[Tuple[NormReport, Path]]:
        trace, spec = load_trace(trace_path)
        if out is None:
            run_dir = Path(trace_path).parent
            config = self.config_manager.load(config_path)
        else:
            config, run_dir = self.prepare(config_path, out, validate=False)
        if spec is None:
            log_warning("Trace carries no potential; using the configured one", help_text="Traces written by simulate store it")
            spec = config.potential
        report = composite_norms(trace, config.norms, spec)
        write_norms(run_dir, report)
        return CommandResult.ok((report, run_dir))


@CommandFactory.register("sweep")
class SweepCommand(ConfigAwareCommand):
    """Run the configured initial data for every N of the list"""

    def name(self) -> str:
        return "sweep"

    def description(self) -> str:
        return "Evolve across the N list and summarize the norms"

    def execute(
        self,
        config_path: Optional[str] = None,
        out: Optional[str] = None,
        seed: Optional[int] = None,
        progress: Optional[bool] = None,
    ) -> CommandResult[Tuple[SweepReport, Path]]:
        config, run_dir = self.prepare(config_path, out, seed)
        grid = ConfigManager.grid(config)
        big_ns = config.big_n_list
        with _progress(_show_progress(config, progress), "sweep", len(big_ns)) as advance:
            done: List[float] = []

            def finished(big_n: float) -> None:
                done.append(big_n)
                advance(len(done))

            report = n_sweep(
                config.initial,
                big_ns,
                config.potential,
                grid,
                config.scheme,
                config.norms,
                config.sweep,
                config.seed,
                on_done=finished,
            )
        write_csv(run_dir / "sweep.csv", report.rows())
        write_json(run_dir / "sweep.json", report.summary())
        if not report.succeeded:
            return CommandResult.failure("Every N of the sweep failed", (report, run_dir))
        return CommandResult.ok((report, run_dir))


def _run_lemma(lemma: str, config: RunConfig) -> LemmaCheck:
    opts = config.verify
    seed = config.seed
    if lemma == "duhamel":
        return verify_duhamel(opts.b, opts, seed)
    if lemma == "strichartz":
        return verify_strichartz(opts.delta, opts.p, None, opts, seed)
    if lemma == "quartertime":
        return verify_quartertime(opts, seed)
    if lemma == "mlogm":
        return verify_mlogm(opts.mlogm_m, opts.mlogm_a)
    if lemma == "sobolev-angle":
        return verify_sobolev_angle(opts.sobolev_p, opts.sobolev_q, opts.sobolev_alpha, opts, seed)
    raise CommandError(f"Unknown lemma {lemma!r}; expected one of {', '.join(LEMMA_IDS)}", command="verify")


@CommandFactory.register("verify")
class VerifyCommand(ConfigAwareCommand):
    """Numerically check one of the estimates on a seeded ensemble"""

    def name(self) -> str:
        return "verify"

    def description(self) -> str:
        return "Ratio ensembles for the Duhamel, Strichartz, quarter-time, M log M and Sobolev-at-an-angle estimates"

    def execute(
        self,
        lemma: str,
        config_path: Optional[str] = None,
        out: Optional[str] = None,
        seed: Optional[int] = None,
        overrides: Optional[Dict[str, Any]] = None,
    ) -> CommandResult[Tuple[LemmaCheck, Path]]:
        if lemma not in LEMMA_IDS:
            raise CommandError(f"Unknown lemma {lemma!r}; expected one of {', '.join(LEMMA_IDS)}", command="verify")
        config, run_dir = self.prepare(config_path, out, seed, validate=False, overrides={"verify": overrides or {}})
        check = _run_lemma(lemma, config)
        write_csv(run_dir / f"lemma_{lemma}.csv", check.rows(), ("level", "sample", "ratio"))
        write_json(run_dir / f"lemma_{lemma}.json", check.summary())
        if not check.trend_flat():
            log_warning(f"{lemma}: refinement slope {check.slope:+.3f} is outside the flat band")
        return CommandResult.ok((check, run_dir))


@CommandFactory.register("oracle")
class OracleCommand(ConfigAwareCommand):
    """Cross-check the assemblers, series and schemes against independent references"""

    def name(self) -> str:
        return "oracle"

    def description(self) -> str:
        return "Run the oracle ledger"

    def execute(
        self,
        config_path: Optional[str] = None,
        out: Optional[str] = None,
        seed: Optional[int] = None,
        only: Optional[List[str]] = None,
    ) -> CommandResult[Tuple[OracleLedger, Path]]:
        config, run_dir = self.prepare(config_path, out, seed, validate=False)
        ledger = oracle_suite(config.seed, only=only or None)
        write_csv(run_dir / "oracle.csv", ledger.rows())
        write_json(
            run_dir / "oracle.json",
            {"passed": ledger.passed, "failed": [f"{e.name}@{e.n}" for e in ledger.failed], "entries": ledger.rows()},
        )
        if not ledger.passed:
            return CommandResult.failure(f"{len(ledger.failed)} oracle check(s) failed", (ledger, run_dir))
        return CommandResult.ok((ledger, run_dir))


@CommandFactory.register("validate_config")
class ValidateConfigCommand(ConfigAwareCommand):
    """Report every cross-field inequality of a configuration"""

    def name(self) -> str:
        return "validate-config"

    def description(self) -> str:
        return "Check a run configuration without running anything"

    def execute(self, config_path: Optional[str] = None) -> CommandResult[Tuple[List[ConfigCheck], Dict[str, str]]]:
        config = self.config_manager.load(config_path)
        checks = ConfigManager.checks(config)
        info = {"hash": ConfigManager.config_hash(config), "source": str(config_path or "<defaults>")}
        failed = [c for c in checks if not c.passed]
        if failed:
            return CommandResult.failure(f"Configuration violates {failed[0].inequality}", (checks, info))
        return CommandResult.ok((checks, info))
