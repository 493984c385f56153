"""
N-sweeps: the same initial-data recipe evolved for a list of N, with the
diagnostic norms compared across N.
"""
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field as PydanticField

from hfb_cli.core.errors import HfbError, ValidationError, log_warning
from hfb_cli.core.physics.hfb_state import InitialDataRecipe, instantiate
from hfb_cli.core.physics.integrator import SchemeConfig, evolve
from hfb_cli.core.physics.lattice import Grid
from hfb_cli.core.physics.norms import NormConfig, NormReport, composite_norms
from hfb_cli.core.physics.potentials import PotentialSpec, check_resolved
from hfb_cli.core.runtime import Runtime

SUMMARY_NORMS = ("nt_lambda", "nt_gamma_dot", "nt_phi", "script_n")


class SweepOptions(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    window_fractions: Tuple[float, ...] = (0.25, 0.5, 1.0)
    drop_smallest_outlier: bool = False
    outlier_factor: float = PydanticField(10.0, gt=1.0)


@dataclass
class SweepEntry:
    big_n: float
    norms: List[NormReport] = field(default_factory=list)
    conserved: List[dict] = field(default_factory=list)
    runtime: float = 0.0
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def final(self) -> NormReport:
        return self.norms[-1]


@dataclass
class SweepReport:
    """Per-N norm reports and the across-N summary"""

    entries: Dict[float, SweepEntry]
    windows: Tuple[float, ...]
    dropped: List[float] = field(default_factory=list)

    @property
    def succeeded(self) -> List[SweepEntry]:
        return [e for e in self.entries.values() if e.ok and e.big_n not in self.dropped]

    @property
    def failures(self) -> Dict[float, str]:
        return {n: e.error for n, e in self.entries.items() if e.error is not None}

    def series(self, name: str) -> Tuple[np.ndarray, np.ndarray]:
        """(N, value) of one norm at the full window over the successful runs"""
        points = [(e.big_n, getattr(e.final(), name)) for e in self.succeeded]
        points = [(n, v) for n, v in points if v is not None]
        if not points:
            return np.zeros(0), np.zeros(0)
        ns, values = zip(*points)
        return np.asarray(ns, dtype=float), np.asarray(values, dtype=float)

    def ratio(self, name: str) -> Optional[float]:
        _, values = self.series(name)
        if values.size == 0 or np.min(values) <= 0:
            return None
        return float(np.max(values) / np.min(values))

    def slope(self, name: str) -> Optional[float]:
        """log-log slope over the top half of the N list"""
        ns, values = self.series(name)
        if values.size < 2 or np.any(values <= 0):
            return None
        start = values.size // 2 if values.size >= 4 else 0
        return float(np.polyfit(np.log(ns[start:]), np.log(values[start:]), 1)[0])

    def summary(self) -> Dict[str, object]:
        norms = {}
        for name in SUMMARY_NORMS:
            norms[name] = {"max_min_ratio": self.ratio(name), "slope": self.slope(name)}
        return {
            "big_n": [float(n) for n in self.entries],
            "windows": list(self.windows),
            "failed": {str(n): msg for n, msg in self.failures.items()},
            "dropped": [float(n) for n in self.dropped],
            "norms": norms,
        }

    def rows(self) -> List[Dict[str, Optional[float]]]:
        out: List[Dict[str, Optional[float]]] = []
        for entry in self.entries.values():
            for report in entry.norms:
                out.append({"big_n": entry.big_n, **report.as_row()})
        return out


def check_big_ns(big_ns: Sequence[float], spec: PotentialSpec, grid: Grid) -> None:
    if not big_ns:
        raise ValidationError("the N list is empty", field="big_n_list")
    if any(b <= a for a, b in zip(big_ns, big_ns[1:])):
        raise ValidationError(f"N list {list(big_ns)} must be strictly increasing", field="big_n_list")
    check_resolved(spec.with_big_n(max(big_ns)), grid)


def _drop_outlier(report: SweepReport, factor: float) -> None:
    """Discard the smallest N when its norms sit far from the rest"""
    ok = report.succeeded
    if len(ok) < 3:
        return
    first, rest = ok[0], ok[1:]
    for name in ("nt_lambda", "nt_gamma_dot", "nt_phi"):
        others = np.array([getattr(e.final(), name) for e in rest])
        value = getattr(first.final(), name)
        if np.min(others) > 0 and value > 0 and max(value / np.max(others), np.min(others) / value) > factor:
            report.dropped.append(first.big_n)
            log_warning(f"N={first.big_n:g} is an outlier for {name} and is left out of the summary")
            return


def n_sweep(
    recipe: InitialDataRecipe,
    big_ns: Sequence[float],
    spec: PotentialSpec,
    grid: Grid,
    scheme: SchemeConfig,
    cfg: NormConfig,
    options: SweepOptions = SweepOptions(),
    seed: int = 0,
    on_done: Optional[Callable[[float], None]] = None,
) -> SweepReport:
    """
    Evolve the recipe for every N and evaluate the norms on [0, fT) for each
    window fraction f. A failing N is recorded and the sweep continues.
    """
    big_ns = [float(n) for n in big_ns]
    check_big_ns(big_ns, spec, grid)
    windows = tuple(f * scheme.T for f in options.window_fractions)
    if min(windows) < scheme.dt * (1.0 - 1e-9):
        raise ValidationError(f"window {min(windows):g} holds no time step of dt={scheme.dt:g}", field="window_fractions")

    def run(big_n: float) -> SweepEntry:
        entry = SweepEntry(big_n=big_n)
        started = time.perf_counter()
        try:
            spec_n = spec.with_big_n(big_n)
            state = instantiate(recipe, grid, spec_n, seed)
            trace = evolve(state, scheme)
            entry.conserved = list(trace.metadata.get("conserved", []))
            entry.norms = [composite_norms(trace, cfg, spec_n, T=w) for w in windows]
        except HfbError as exc:
            entry.error = exc.message
            log_warning(f"N={big_n:g} failed: {exc.message}")
        entry.runtime = time.perf_counter() - started
        if on_done is not None:
            on_done(big_n)
        return entry

    report = SweepReport(entries=Runtime().map_keyed(run, big_ns), windows=windows)
    if options.drop_smallest_outlier:
        _drop_outlier(report, options.outlier_factor)
    return report
