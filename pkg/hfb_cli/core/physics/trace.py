"""
Stored space-time series: diagonal slices, sampled kernels and phi.
"""
from dataclasses import dataclass, field
from itertools import product
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from hfb_cli.core.errors import ValidationError
from hfb_cli.core.physics.hfb_state import HFBState
from hfb_cli.core.physics.lattice import Grid, Offset, kernel_diag, uniform_step


def default_offsets(grid: Grid, stride: int = 1) -> List[Offset]:
    """Every lattice offset whose components are multiples of stride (w = 0 first)"""
    if stride < 1 or grid.n % stride:
        raise ValidationError(f"offset stride {stride} must divide n={grid.n}", field="offset_stride")
    axis = range(0, grid.n, stride)
    return [tuple(int(c) for c in w) for w in product(axis, repeat=grid.d)]


def normalize_offsets(grid: Grid, offsets: Sequence[Sequence[int]]) -> List[Offset]:
    out: List[Offset] = []
    for w in offsets:
        w = tuple(int(c) % grid.n for c in w)
        if len(w) != grid.d:
            raise ValidationError(f"offset {w} is not a {grid.d}-dimensional lattice vector", field="offsets")
        if w not in out:
            out.append(w)
    return out


@dataclass(eq=False)
class SpaceTimeTrace:
    """
    Time series of one evolution run.

    lambda_diag / gamma_diag have shape (nt, n_offsets, size) and hold
    x -> K(t, x, x + w); kernel snapshots are kept every `kernel_stride`
    steps, phi at every step.
    """

    grid: Grid
    times: np.ndarray
    offsets: List[Offset]
    phi: np.ndarray
    lambda_diag: np.ndarray
    gamma_diag: np.ndarray
    kernel_stride: int
    lambda_snaps: np.ndarray
    gamma_snaps: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)
    final_state: Optional[HFBState] = None

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        nt = self.times.size
        if self.phi.shape != (nt, self.grid.size):
            raise ValidationError(f"phi series has shape {self.phi.shape}, expected {(nt, self.grid.size)}", field="phi")
        expected = (nt, len(self.offsets), self.grid.size)
        for name in ("lambda_diag", "gamma_diag"):
            if getattr(self, name).shape != expected:
                raise ValidationError(f"{name} has shape {getattr(self, name).shape}, expected {expected}", field=name)
        if self.kernel_stride < 1:
            raise ValidationError("kernel stride must be positive", field="kernel_stride")

    @property
    def dt(self) -> float:
        return uniform_step(self.times)

    @property
    def nt(self) -> int:
        return int(self.times.size)

    @property
    def kernel_times(self) -> np.ndarray:
        return self.times[:: self.kernel_stride][: self.lambda_snaps.shape[0]]

    @property
    def full_offset_set(self) -> bool:
        return len(self.offsets) == self.grid.size

    def offset_index(self, offset: Sequence[int]) -> int:
        key = tuple(int(c) % self.grid.n for c in offset)
        try:
            return self.offsets.index(key)
        except ValueError:
            raise ValidationError(f"offset {key} was not traced", field="offsets") from None

    def diag(self, kind: str, offset: Sequence[int]) -> np.ndarray:
        """(nt, size) series of x -> K(t, x, x + w) for kind 'lambda' or 'gamma'"""
        return self.diag_block(kind)[:, self.offset_index(offset)]

    def diag_block(self, kind: str) -> np.ndarray:
        if kind == "lambda":
            return self.lambda_diag
        if kind == "gamma":
            return self.gamma_diag
        raise ValidationError(f"unknown trace component {kind!r}", field="kind")

    def kernels(self, kind: str) -> np.ndarray:
        if kind == "lambda":
            return self.lambda_snaps
        if kind == "gamma":
            return self.gamma_snaps
        raise ValidationError(f"unknown trace component {kind!r}", field="kind")

    def scaled(self, factor: complex) -> "SpaceTimeTrace":
        return SpaceTimeTrace(
            grid=self.grid,
            times=self.times,
            offsets=list(self.offsets),
            phi=self.phi * factor,
            lambda_diag=self.lambda_diag * factor,
            gamma_diag=self.gamma_diag * factor,
            kernel_stride=self.kernel_stride,
            lambda_snaps=self.lambda_snaps * factor,
            gamma_snaps=self.gamma_snaps * factor,
            metadata=dict(self.metadata),
        )


class TraceRecorder:
    """Accumulates snapshots during evolve and builds the trace"""

    def __init__(self, grid: Grid, offsets: Sequence[Sequence[int]], store_every: int = 1) -> None:
        if store_every < 1:
            raise ValidationError("store_every must be at least 1", field="store_every")
        self.grid = grid
        self.offsets = normalize_offsets(grid, offsets)
        self.store_every = store_every
        self._times: List[float] = []
        self._phi: List[np.ndarray] = []
        self._lambda_diag: List[np.ndarray] = []
        self._gamma_diag: List[np.ndarray] = []
        self._lambda_snaps: List[np.ndarray] = []
        self._gamma_snaps: List[np.ndarray] = []

    def __len__(self) -> int:
        return len(self._times)

    def record(self, state: HFBState) -> None:
        step = len(self._times)
        self._times.append(state.t)
        self._phi.append(state.phi.values.copy())
        self._lambda_diag.append(np.stack([kernel_diag(state.lam, w).values for w in self.offsets]))
        self._gamma_diag.append(np.stack([kernel_diag(state.gamma, w).values for w in self.offsets]))
        if step % self.store_every == 0:
            self._lambda_snaps.append(state.lam.values.copy())
            self._gamma_snaps.append(state.gamma.values.copy())

    def build(self, metadata: Optional[Dict[str, Any]] = None) -> SpaceTimeTrace:
        if not self._times:
            raise ValidationError("no snapshots were recorded", field="trace")
        size = self.grid.size
        return SpaceTimeTrace(
            grid=self.grid,
            times=np.asarray(self._times),
            offsets=list(self.offsets),
            phi=np.stack(self._phi),
            lambda_diag=np.stack(self._lambda_diag).reshape(len(self), len(self.offsets), size),
            gamma_diag=np.stack(self._gamma_diag).reshape(len(self), len(self.offsets), size),
            kernel_stride=self.store_every,
            lambda_snaps=np.stack(self._lambda_snaps),
            gamma_snaps=np.stack(self._gamma_snaps),
            metadata=dict(metadata or {}),
        )

