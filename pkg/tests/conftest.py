import math
from typing import List

import numpy as np
import pytest

from hfb_cli.core.errors import ErrorHandler, ErrorSeverity, HfbError
from hfb_cli.core.experiments.oracles import random_state
from hfb_cli.core.physics.lattice import Grid, make_grid
from hfb_cli.core.physics.potentials import PotentialSpec
from hfb_cli.core.runtime import Runtime
from hfb_cli.utils.singleton import Singleton


@pytest.fixture(autouse=True)
def fresh_singletons():
    """Every test starts with default ConfigManager/Runtime and a clean ErrorHandler"""
    Singleton.clear_all_instances()
    handler = ErrorHandler()
    handler.reset()
    handler.quiet = True
    Runtime().configure(serial=True)
    yield
    handler.reset()
    Singleton.clear_all_instances()


class WarningCollector:
    def __init__(self) -> None:
        self.events: List[HfbError] = []

    def __call__(self, error: HfbError) -> None:
        self.events.append(error)

    @property
    def messages(self) -> List[str]:
        return [e.message for e in self.events]


@pytest.fixture
def warnings_seen() -> WarningCollector:
    collector = WarningCollector()
    ErrorHandler().register(collector, ErrorSeverity.WARNING)
    return collector


@pytest.fixture
def grid_1d() -> Grid:
    return make_grid(1, 16, 2.0 * math.pi)


@pytest.fixture
def grid_2d() -> Grid:
    return make_grid(2, 8, 2.0 * math.pi)


@pytest.fixture
def spec() -> PotentialSpec:
    return PotentialSpec(beta=0.8, big_n=4.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def state_1d(grid_1d, spec, rng):
    return random_state(grid_1d, spec, rng)
