"""
Band-limited modal ensembles for the linear estimates.

A kernel is held as coefficients a(t, m1, m2) in the orthonormal plane-wave
basis e_m(x) = exp(i xi_m . x) / L^(d/2) of the torus [0, L)^d, restricted to
integer vectors with |m|_inf <= cutoff. The free flow acts on the pair
(m1, m2) as exp(-i t omega) with omega = |xi_m1|^2 +- |xi_m2|^2.
"""
from dataclasses import dataclass
from functools import cached_property
from itertools import product
from typing import Literal, Optional, Tuple

import numpy as np

from hfb_cli.core.errors import ValidationError
from hfb_cli.core.physics.lattice import japanese, magnitude, make_grid

SourceKind = Literal["random", "diagonal", "tensor", "free"]
SOURCE_KINDS: Tuple[str, ...] = ("random", "diagonal", "tensor", "free")


@dataclass(frozen=True)
class ModeSet:
    """Integer modes |m|_inf <= cutoff of the torus [0, L)^d"""

    d: int
    L: float
    cutoff: int

    def __post_init__(self) -> None:
        if self.d not in (1, 2, 3):
            raise ValidationError(f"dimension d={self.d} must be 1, 2 or 3", field="d")
        if self.cutoff < 0:
            raise ValidationError(f"mode cutoff {self.cutoff} must be non-negative", field="cutoff")

    @cached_property
    def integers(self) -> np.ndarray:
        axis = range(-self.cutoff, self.cutoff + 1)
        return np.array(list(product(axis, repeat=self.d)), dtype=int).reshape(-1, self.d)

    @cached_property
    def vectors(self) -> np.ndarray:
        """(M, d) wavevectors 2 pi m / L"""
        return (2.0 * np.pi / self.L) * self.integers

    @cached_property
    def k_squared(self) -> np.ndarray:
        return np.sum(self.vectors**2, axis=1)

    @property
    def size(self) -> int:
        return int(self.integers.shape[0])

    @property
    def pair_count(self) -> int:
        return self.size**2

    def index(self, m: Tuple[int, ...]) -> int:
        matches = np.flatnonzero(np.all(self.integers == np.asarray(m, dtype=int), axis=1))
        if matches.size == 0:
            raise ValidationError(f"mode {tuple(m)} is outside |m| <= {self.cutoff}", field="mode")
        return int(matches[0])

    @cached_property
    def negation(self) -> np.ndarray:
        """Index of -m for every m"""
        return np.array([self.index(tuple(-m)) for m in self.integers], dtype=int)

    def pair_frequencies(self, sign: str = "plus_plus") -> np.ndarray:
        """Flattened |xi_1|^2 + |xi_2|^2 (or with a minus sign) over all mode pairs"""
        k2 = self.k_squared
        if sign == "plus_plus":
            return (k2[:, None] + k2[None, :]).reshape(-1)
        if sign == "plus_minus":
            return (k2[:, None] - k2[None, :]).reshape(-1)
        raise ValidationError(f"unknown frequency sign {sign!r}", field="sign")

    def pair_weight(self, x_power: float = 0.0, y_power: float = 0.0) -> np.ndarray:
        """Flattened <xi_1>^x_power <xi_2>^y_power"""
        wx = japanese([self.vectors[:, i] for i in range(self.d)], x_power)
        wy = japanese([self.vectors[:, i] for i in range(self.d)], y_power)
        return (wx[:, None] * wy[None, :]).reshape(-1)

    def pair_magnitudes(self) -> Tuple[np.ndarray, np.ndarray]:
        """Flattened |xi_1| and |xi_2| over all mode pairs"""
        mag = magnitude([self.vectors[:, i] for i in range(self.d)])
        return np.repeat(mag, self.size), np.tile(mag, self.size)

    def total_momentum(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Integer sums m1 + m2 collapsed to distinct values.

        Returns:
            (unique sums of shape (S, d), inverse index of shape (M*M,))
        """
        sums = (self.integers[:, None, :] + self.integers[None, :, :]).reshape(-1, self.d)
        unique, inverse = np.unique(sums, axis=0, return_inverse=True)
        return unique, inverse.reshape(-1)

    def plane_waves(self, points: np.ndarray) -> np.ndarray:
        """(npoints, M) matrix of e_m evaluated at points of shape (npoints, d)"""
        phases = np.asarray(points, dtype=float) @ self.vectors.T
        return np.exp(1j * phases) / self.L ** (self.d / 2.0)

    def sample_points(self, n: int) -> Tuple[np.ndarray, float]:
        """Points of the uniform n^d grid and its cell volume"""
        if n <= 2 * self.cutoff:
            raise ValidationError(f"grid n={n} does not separate modes up to {self.cutoff}", field="n")
        grid = make_grid(self.d, n, self.L)
        return grid.flat_coordinates(), grid.cell


def time_grid(T: float, nt: int, extended: bool = False) -> np.ndarray:
    """nt samples of [0, T), or 2 nt samples of [0, 2T) when extended"""
    if T <= 0 or nt < 2:
        raise ValidationError(f"time grid needs T > 0 and at least two samples (T={T}, nt={nt})", field="nt")
    dt = T / nt
    return dt * np.arange(2 * nt if extended else nt)


@dataclass(frozen=True, eq=False)
class ModalSource:
    """
    F(t) = sum_j amplitudes[j] exp(i nu_j t) + free_data exp(-i t omega)
    on flattened mode pairs.
    """

    frequencies: np.ndarray
    amplitudes: np.ndarray
    free_data: Optional[np.ndarray] = None
    omega: Optional[np.ndarray] = None

    def evaluate(self, times: np.ndarray) -> np.ndarray:
        """(nt, M*M) samples"""
        times = np.asarray(times, dtype=float)
        values = np.exp(1j * np.outer(times, self.frequencies)) @ self.amplitudes
        if self.free_data is not None and self.omega is not None:
            values = values + np.exp(-1j * np.outer(times, self.omega)) * self.free_data[None, :]
        return values

    def spatial(self) -> np.ndarray:
        """Time-independent part: the sum of all amplitudes"""
        total = np.sum(self.amplitudes, axis=0)
        if self.free_data is not None:
            total = total + self.free_data
        return total


def _complex_normal(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def spatial_coefficients(modes: ModeSet, kind: str, rng: np.random.Generator) -> np.ndarray:
    """
    Flat-spectrum random coefficients over mode pairs, unit l2 norm.

    kind 'random' fills every pair, 'diagonal' only pairs (m, -m) (kernels
    concentrated near x = y), 'tensor' only pairs (m, 0), i.e. f(x) times the
    normalized constant in y.
    """
    M = modes.size
    coeffs = np.zeros((M, M), dtype=complex)
    if kind in ("random", "free"):
        coeffs = _complex_normal(rng, (M, M))
    elif kind == "diagonal":
        coeffs[np.arange(M), modes.negation] = _complex_normal(rng, (M,))
    elif kind == "tensor":
        coeffs[:, modes.index((0,) * modes.d)] = _complex_normal(rng, (M,))
    else:
        raise ValidationError(f"unknown ensemble kind {kind!r}; choose from {', '.join(SOURCE_KINDS)}", field="kind")
    flat = coeffs.reshape(-1)
    return flat / np.linalg.norm(flat)


class ModalEnsemble:
    """
    Seeded ensemble of band-limited space-time sources.

    Sample i draws from default_rng([seed, i]) so that it is identical at
    every refinement level and independent of evaluation order.
    """

    def __init__(
        self,
        modes: ModeSet,
        seed: int = 0,
        kind: str = "random",
        n_frequencies: int = 4,
        tau_max: float = 20.0,
    ) -> None:
        if kind not in SOURCE_KINDS:
            raise ValidationError(f"unknown ensemble kind {kind!r}; choose from {', '.join(SOURCE_KINDS)}", field="kind")
        if n_frequencies < 1 or tau_max < 0:
            raise ValidationError("an ensemble needs at least one time frequency and tau_max >= 0", field="n_frequencies")
        self.modes = modes
        self.seed = int(seed)
        self.kind = kind
        self.n_frequencies = n_frequencies
        self.tau_max = tau_max

    def rng(self, index: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, int(index)])

    def sample(self, index: int) -> ModalSource:
        rng = self.rng(index)
        if self.kind == "free":
            data = spatial_coefficients(self.modes, "free", rng)
            return ModalSource(
                frequencies=np.zeros(1),
                amplitudes=np.zeros((1, self.modes.pair_count), dtype=complex),
                free_data=data,
                omega=self.modes.pair_frequencies(),
            )
        nu = rng.uniform(-self.tau_max, self.tau_max, size=self.n_frequencies)
        amplitudes = np.stack([spatial_coefficients(self.modes, self.kind, rng) for _ in range(self.n_frequencies)])
        return ModalSource(frequencies=nu, amplitudes=amplitudes / np.sqrt(self.n_frequencies))

    def initial_data(self, index: int) -> np.ndarray:
        """Random data for the homogeneous part, drawn after the source"""
        rng = np.random.default_rng([self.seed, int(index), 1])
        return spatial_coefficients(self.modes, "random" if self.kind == "free" else self.kind, rng)


def single_mode_source(modes: ModeSet, m1: Tuple[int, ...], m2: Tuple[int, ...], tau0: float) -> ModalSource:
    """F = exp(i tau0 t) on the single pair (m1, m2)"""
    amplitudes = np.zeros((1, modes.pair_count), dtype=complex)
    amplitudes[0, modes.index(m1) * modes.size + modes.index(m2)] = 1.0
    return ModalSource(frequencies=np.array([float(tau0)]), amplitudes=amplitudes)


def free_solution(data: np.ndarray, omega: np.ndarray, times: np.ndarray, T: Optional[float] = None) -> np.ndarray:
    """c(t) exp(-i t omega) data, zero outside [0, T) when T is given"""
    values = np.exp(-1j * np.outer(times, omega)) * data[None, :]
    if T is not None:
        dt = times[1] - times[0]
        values[times >= T - 0.5 * dt] = 0.0
    return values


def duhamel(source: np.ndarray, omega: np.ndarray, dt: float) -> np.ndarray:
    """
    Windowed Duhamel integral

        u(t) = integral of c(t - s) exp(-i (t - s) omega) c(s) F(s) ds

    with c the indicator of [0, T), T = nt dt, by left Riemann sums. The
    source holds the nt samples of [0, T); the result holds the 2 nt samples
    of [0, 2T), outside of which u vanishes.
    """
    nt = source.shape[0]
    s = dt * np.arange(nt)
    rotated = np.exp(1j * np.outer(s, omega)) * source
    prefix = np.concatenate([np.zeros((1, source.shape[1]), dtype=complex), np.cumsum(rotated, axis=0)])
    j = np.arange(2 * nt)
    hi = np.minimum(j, nt - 1) + 1
    lo = np.maximum(0, j - nt + 1)
    window = prefix[hi] - prefix[lo]
    window[lo >= hi] = 0.0
    t = dt * j
    return dt * np.exp(-1j * np.outer(t, omega)) * window


def modal_mixed_norm(
    coeffs: np.ndarray,
    times: np.ndarray,
    modes: ModeSet,
    n: int,
    p: float,
    q: float,
    T: Optional[float] = None,
) -> float:
    """
    ||F||_{L^p(dt) L^q(dx) L^2(dy)} of modal samples (nt, M*M).

    The inner L^2(dy) norm is exact by orthonormality; x is sampled on the
    uniform n^d grid.
    """
    points, cell = modes.sample_points(n)
    E = modes.plane_waves(points)
    M = modes.size
    dt = times[1] - times[0]
    mask = np.ones(times.size, dtype=bool) if T is None else times < T - 0.5 * dt
    per_time = []
    for a in coeffs[mask]:
        inner = np.sqrt(np.sum(np.abs(E @ a.reshape(M, M)) ** 2, axis=1))
        per_time.append(_lp(inner, q, cell))
    return _lp(np.asarray(per_time), p, dt)


def modal_lebesgue_norm(coeffs: np.ndarray, modes: ModeSet, n: int, q: float) -> float:
    """||F||_{L^q(dx) L^2(dy)} of one set of pair coefficients (M*M,)"""
    points, cell = modes.sample_points(n)
    M = modes.size
    inner = np.sqrt(np.sum(np.abs(modes.plane_waves(points) @ coeffs.reshape(M, M)) ** 2, axis=1))
    return _lp(inner, q, cell)


def _lp(values: np.ndarray, p: float, weight: float) -> float:
    if np.isinf(p):
        return float(np.max(values, initial=0.0))
    return float((np.sum(values**p) * weight) ** (1.0 / p))
