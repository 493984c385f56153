"""
Interaction profiles and their mean-field scalings.

The profile is defined through its Fourier transform, supported in the unit
ball, and v_N is built on the grid from v_hat(xi / N^beta). Profiles follow a
strategy interface so new shapes only need a `hat` implementation.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field as PydanticField

from hfb_cli.core.errors import ConfigurationError, UnresolvedRegimeError, ValidationError
from hfb_cli.core.physics.lattice import Field, Grid, from_fourier, magnitude


class PotentialSpec(BaseModel):
    """Scaling parameters and profile choice for v_N"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    beta: float = PydanticField(0.8, ge=0.0, lt=1.0)
    big_n: float = PydanticField(64.0, ge=1.0)
    profile: str = "bump"
    amplitude: float = 1.0
    table: Optional[Tuple[float, ...]] = None
    majorant_factor: float = PydanticField(1.1, gt=0.0)

    @property
    def scale(self) -> float:
        """Radius N^beta of the scaled Fourier support"""
        return float(self.big_n**self.beta)

    def with_big_n(self, big_n: float) -> "PotentialSpec":
        return self.model_copy(update={"big_n": float(big_n)})


class PotentialProfile(ABC):
    """Radial Fourier profile v_hat(|xi|), zero for |xi| >= 1"""

    name: str = ""

    @abstractmethod
    def hat(self, r: np.ndarray) -> np.ndarray:
        """Profile values at radii r"""
        pass

    def __call__(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.where(r < 1.0, self.hat(np.minimum(r, 1.0)), 0.0)


class BumpProfile(PotentialProfile):
    name = "bump"

    def hat(self, r: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", over="ignore"):
            inner = 1.0 - r**2
            return np.where(inner > 0, np.exp(-1.0 / np.where(inner > 0, inner, 1.0)), 0.0)


class CosineProfile(PotentialProfile):
    name = "cosine"

    def hat(self, r: np.ndarray) -> np.ndarray:
        return np.cos(0.5 * np.pi * r) ** 2


class TabulatedProfile(PotentialProfile):
    """Values on a uniform grid of [0, 1], linearly interpolated"""

    name = "tabulated"

    def __init__(self, values: Sequence[float]) -> None:
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size < 2 or not np.all(np.isfinite(values)):
            raise ValidationError("tabulated profile needs at least two finite values", field="table")
        self.values = values
        self.nodes = np.linspace(0.0, 1.0, values.size)

    def hat(self, r: np.ndarray) -> np.ndarray:
        return np.interp(r, self.nodes, self.values, right=0.0)


class ProfileFactory:
    """Factory for profile strategies"""

    @staticmethod
    def create(spec: PotentialSpec) -> PotentialProfile:
        name = spec.profile.lower()
        if name == "bump":
            return BumpProfile()
        if name == "cosine":
            return CosineProfile()
        if name == "tabulated":
            if spec.table is None:
                raise ConfigurationError("profile 'tabulated' requires a table of values", help_text="set potential.table")
            return TabulatedProfile(spec.table)
        raise ConfigurationError(f"Unsupported potential profile: {spec.profile}", help_text="use bump, cosine or tabulated")


def max_resolved_big_n(grid: Grid, beta: float) -> float:
    """Largest N with N^beta <= pi n / L"""
    if beta == 0:
        return float("inf") if grid.nyquist >= 1.0 else 0.0
    return float(grid.nyquist ** (1.0 / beta))


def check_resolved(spec: PotentialSpec, grid: Grid) -> None:
    if spec.scale > grid.nyquist * (1.0 + 1e-12):
        max_n = max_resolved_big_n(grid, spec.beta)
        raise UnresolvedRegimeError(
            f"N^beta = {spec.scale:.6g} exceeds the Nyquist wavenumber {grid.nyquist:.6g} (N^beta <= pi*n/L)",
            max_big_n=max_n,
            help_text=f"use N <= {max_n:.6g} or refine the grid",
        )


def check_exponents(alpha: float, beta: float) -> None:
    """Reject (alpha, beta) outside alpha > 1/2, 2*alpha*beta < 1"""
    if not alpha > 0.5:
        raise ConfigurationError(f"alpha = {alpha} violates alpha > 1/2", inequality="alpha > 1/2")
    if not 2.0 * alpha * beta < 1.0:
        raise ConfigurationError(
            f"2*alpha*beta = {2.0 * alpha * beta:.6g} violates 2*alpha*beta < 1", inequality="2*alpha*beta < 1"
        )


def fourier_samples(spec: PotentialSpec, grid: Grid) -> np.ndarray:
    """v_hat_N(xi) = amplitude * v_hat(xi / N^beta) on the Fourier grid"""
    profile = ProfileFactory.create(spec)
    return spec.amplitude * profile(magnitude(grid.xi) / spec.scale)


def sample_vN(spec: PotentialSpec, grid: Grid) -> Field:
    """
    Physical-space samples of v_N.

    v_N(x) = L^{-d} sum_xi v_hat_N(xi) e^{i xi x}, so the integral of v_N over
    the box equals v_hat(0) for every N.
    """
    check_resolved(spec, grid)
    values = from_fourier(fourier_samples(spec, grid)[None], grid, 1)[0] * grid.size / grid.volume
    return Field(grid, values.real.astype(complex))


@dataclass(frozen=True, eq=False)
class PotentialContext:
    """v_N with its pair matrix V[x, y] = v_N(x - y)"""

    vN: Field
    pair: np.ndarray


@lru_cache(maxsize=16)
def potential_context(spec: PotentialSpec, grid: Grid) -> PotentialContext:
    vN = sample_vN(spec, grid)
    return PotentialContext(vN=vN, pair=pair_values(vN))


def pair_values(vN: Field) -> np.ndarray:
    """Matrix of v(x - y)"""
    return vN.values.real[vN.grid.difference_index]


def majorant_check(
    spec: PotentialSpec, grid: Grid, majorant: Optional[Callable[[np.ndarray], np.ndarray]] = None
) -> bool:
    """
    Pointwise |v_hat| <= w_hat on the grid's scaled wavenumbers.
    The default majorant is majorant_factor times the same profile.
    """
    r = magnitude(grid.xi) / spec.scale
    v = np.abs(spec.amplitude * ProfileFactory.create(spec)(r))
    if majorant is None:
        w = spec.majorant_factor * abs(spec.amplitude) * ProfileFactory.create(spec)(r)
    else:
        w = np.asarray(majorant(r), dtype=float)
    return bool(np.all(v <= w))


def lebesgue_norm(f: Field, p: float) -> float:
    values = np.abs(f.values)
    if np.isinf(p):
        return float(values.max(initial=0.0))
    return float((np.sum(values**p) * f.grid.cell) ** (1.0 / p))


def predicted_decay_exponent(beta: float, d: int, p: float = 1.5) -> float:
    """Exponent of N in ||v_N||_{L^p} / N"""
    return beta * d * (1.0 - 1.0 / p) - 1.0


def decay_exponent(spec: PotentialSpec, grid: Grid, big_ns: Sequence[float], p: float = 1.5) -> float:
    """Log-log slope of ||v_N||_{L^p} / N over big_ns"""
    big_ns = np.asarray(big_ns, dtype=float)
    if big_ns.size < 2:
        raise ValidationError("decay fit needs at least two values of N", field="big_ns")
    norms = [lebesgue_norm(sample_vN(spec.with_big_n(n), grid), p) / n for n in big_ns]
    slope, _ = np.polyfit(np.log(big_ns), np.log(norms), 1)
    return float(slope)
