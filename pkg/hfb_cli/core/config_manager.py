"""
Run configuration and the ConfigManager singleton.
Loads a YAML or JSON file into RunConfig, checks the cross-field
inequalities and derives the content-addressed run directory.
"""
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field as PydanticField, ValidationError as PydanticValidationError

from hfb_cli.core.errors import ConfigurationError, HfbError
from hfb_cli.core.experiments.lemmas import VerifyOptions
from hfb_cli.core.experiments.sweep import SweepOptions
from hfb_cli.core.physics.hfb_state import InitialDataRecipe
from hfb_cli.core.physics.integrator import SchemeConfig
from hfb_cli.core.physics.lattice import Grid, make_grid
from hfb_cli.core.physics.norms import NormConfig
from hfb_cli.core.physics.potentials import PotentialSpec, max_resolved_big_n
from hfb_cli.utils.singleton import Singleton

SCHEMA_VERSION = 1
HASH_EXCLUDED = {"output"}


class GridConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    d: int = 1
    n: int = 32
    L: float = 3.0


class OutputOptions(BaseModel):
    """Presentation settings; not part of the config hash"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    out_dir: str = "runs"
    progress: bool = True
    verbose: bool = False


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    schema_version: int = SCHEMA_VERSION
    seed: int = PydanticField(0, ge=0)
    grid: GridConfig = GridConfig()
    potential: PotentialSpec = PotentialSpec()
    big_n_list: Tuple[float, ...] = (16.0, 32.0, 64.0)
    initial: InitialDataRecipe = InitialDataRecipe()
    scheme: SchemeConfig = SchemeConfig()
    norms: NormConfig = NormConfig()
    sweep: SweepOptions = SweepOptions()
    verify: VerifyOptions = VerifyOptions()
    output: OutputOptions = OutputOptions()


@dataclass(frozen=True)
class ConfigCheck:
    inequality: str
    passed: bool
    detail: str


class ConfigManager(metaclass=Singleton):
    """
    Singleton access to the active RunConfig.
    Environment variables are never consulted; the file is the whole input.
    """

    def __init__(self) -> None:
        self._config: Optional[RunConfig] = None
        self._source: Optional[Path] = None

    @property
    def config(self) -> RunConfig:
        if self._config is None:
            self._config = RunConfig()
        return self._config

    @property
    def source(self) -> Optional[Path]:
        return self._source

    def load(self, path: Optional[Union[str, Path]] = None) -> RunConfig:
        """Load and parse a config file; None selects the defaults"""
        if path is None:
            self._config, self._source = RunConfig(), None
            return self._config
        path = Path(path)
        try:
            raw = yaml.safe_load(path.read_text())
        except FileNotFoundError:
            raise ConfigurationError(f"Configuration file not found at {path}", help_text="Pass an existing file with --config")
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Invalid YAML/JSON in configuration file: {str(e)}")
        self._config = self.parse(raw or {})
        self._source = path
        return self._config

    @staticmethod
    def parse(raw: Dict[str, Any]) -> RunConfig:
        if not isinstance(raw, dict):
            raise ConfigurationError("The configuration file must hold a mapping at the top level")
        try:
            config = RunConfig.model_validate(raw)
        except PydanticValidationError as e:
            problems = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
            raise ConfigurationError(f"Invalid configuration: {problems}")
        if config.schema_version != SCHEMA_VERSION:
            raise ConfigurationError(
                f"schema_version {config.schema_version} is not supported (expected {SCHEMA_VERSION})",
                inequality="schema_version == 1",
            )
        return config

    def use(self, config: RunConfig) -> RunConfig:
        self._config = config
        return config

    @staticmethod
    def with_seed(config: RunConfig, seed: Optional[int]) -> RunConfig:
        return config if seed is None else config.model_copy(update={"seed": int(seed)})

    @classmethod
    def with_overrides(cls, config: RunConfig, section: str, values: Dict[str, Any]) -> RunConfig:
        """Replace fields of one section and re-run the full validation"""
        if not values:
            return config
        raw = config.model_dump(mode="json")
        if not isinstance(raw.get(section), dict):
            raise ConfigurationError(f"Unknown configuration section {section!r}")
        raw[section] = {**raw[section], **values}
        return cls.parse(raw)

    @staticmethod
    def grid(config: RunConfig) -> Grid:
        return make_grid(config.grid.d, config.grid.n, config.grid.L)

    @staticmethod
    def checks(config: RunConfig) -> List[ConfigCheck]:
        """Every cross-field inequality with its outcome"""
        alpha = config.norms.alpha
        beta = config.potential.beta
        beta_prime = config.norms.beta_prime_for(beta)
        scheme = config.scheme
        out = [
            ConfigCheck("alpha > 1/2", alpha > 0.5, f"alpha = {alpha:g}"),
            ConfigCheck("2*alpha*beta < 1", 2.0 * alpha * beta < 1.0, f"2*alpha*beta = {2.0 * alpha * beta:g}"),
            ConfigCheck("beta < beta' < 1", beta < beta_prime < 1.0, f"beta = {beta:g}, beta' = {beta_prime:g}"),
            ConfigCheck("T <= 1", scheme.T <= 1.0, f"T = {scheme.T:g}"),
        ]
        steps = scheme.T / scheme.dt
        out.append(ConfigCheck("T/dt integral", abs(steps - round(steps)) <= 1e-9 * max(1.0, steps), f"T/dt = {steps:.12g}"))
        try:
            grid = ConfigManager.grid(config)
        except HfbError as e:
            out.append(ConfigCheck("grid ranges", False, e.message))
            return out
        largest = max((config.potential.big_n, *config.big_n_list))
        limit = max_resolved_big_n(grid, beta)
        resolved = largest <= limit * (1.0 + 1e-12)
        detail = f"N = {largest:g}, max admissible N = {limit:.6g}" if math.isfinite(limit) else f"N = {largest:g}"
        out.append(ConfigCheck("N^beta <= pi*n/L", resolved, detail))
        return out

    def validate(self, config: Optional[RunConfig] = None) -> RunConfig:
        """
        Raise ConfigurationError naming the first violated inequality.

        Returns:
            the validated config
        """
        config = config or self.config
        for check in self.checks(config):
            if not check.passed:
                error = ConfigurationError(
                    f"Configuration violates {check.inequality} ({check.detail})",
                    inequality=check.inequality,
                )
                if check.inequality.startswith("N^beta"):
                    grid = self.grid(config)
                    error.details["max_bigN"] = max_resolved_big_n(grid, config.potential.beta)
                raise error
        return config

    @staticmethod
    def canonical(config: RunConfig) -> Dict[str, Any]:
        """JSON-ready dump of everything that changes results"""
        return config.model_dump(mode="json", exclude=HASH_EXCLUDED)

    @classmethod
    def config_hash(cls, config: RunConfig) -> str:
        text = json.dumps(cls.canonical(config), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def run_dir(self, config: RunConfig, out: Optional[Union[str, Path]] = None) -> Path:
        base = Path(out) if out is not None else Path(config.output.out_dir)
        path = base / self.config_hash(config)[:16]
        path.mkdir(parents=True, exist_ok=True)
        return path

    def dump(self, config: RunConfig, path: Union[str, Path]) -> Path:
        """Write the canonical config as YAML (.yaml/.yml) or JSON"""
        path = Path(path)
        data = self.canonical(config)
        if path.suffix in (".yaml", ".yml"):
            path.write_text(yaml.safe_dump(data, sort_keys=True, default_flow_style=False))
        else:
            path.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")
        return path
