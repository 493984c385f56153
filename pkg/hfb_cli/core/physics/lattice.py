"""
Periodic-box grids, spectral transforms and kernel algebra.

Fields are flat complex arrays of length n**d; kernels are (n**d, n**d)
matrices indexed by (x, y). Integrals are Riemann sums with weight dx**d, so
the discrete delta kernel is I / dx**d.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.fft as sfft

from hfb_cli.core.errors import GridError, ValidationError
from hfb_cli.core.runtime import Runtime

SymmetryTag = Literal["symmetric", "hermitian", "antisymmetric", "none"]
SYMMETRY_TAGS: Tuple[str, ...] = ("symmetric", "hermitian", "antisymmetric", "none")

Offset = Tuple[int, ...]
FieldWeight = Union[Callable[..., np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on the torus [0, L)^d"""

    d: int
    n: int
    L: float

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def cell(self) -> float:
        """Quadrature weight dx**d"""
        return self.dx**self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def volume(self) -> float:
        return self.L**self.d

    @property
    def nyquist(self) -> float:
        """Largest representable wavenumber per axis, pi * n / L"""
        return np.pi * self.n / self.L

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Per-axis wavenumbers 2*pi*m/L in FFT order"""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    @cached_property
    def xi(self) -> Tuple[np.ndarray, ...]:
        """Wavevector components on the full Fourier grid, each of shape `shape`"""
        return tuple(np.meshgrid(*([self.wavenumbers] * self.d), indexing="ij"))

    @cached_property
    def k_squared(self) -> np.ndarray:
        return sum(component**2 for component in self.xi)

    def coordinates(self) -> Tuple[np.ndarray, ...]:
        axis = self.dx * np.arange(self.n)
        return tuple(np.meshgrid(*([axis] * self.d), indexing="ij"))

    def flat_coordinates(self) -> np.ndarray:
        """(size, d) array of grid points"""
        return np.stack([c.ravel() for c in self.coordinates()], axis=-1)

    def flat_wavevectors(self) -> np.ndarray:
        """(size, d) array of wavevectors in flattened FFT order"""
        return np.stack([c.ravel() for c in self.xi], axis=-1)

    def pair_xi(self) -> Tuple[Tuple[np.ndarray, ...], Tuple[np.ndarray, ...]]:
        """(xi, eta) components broadcastable to shape + shape"""
        pad = (1,) * self.d
        xi = tuple(c.reshape(self.shape + pad) for c in self.xi)
        eta = tuple(c.reshape(pad + self.shape) for c in self.xi)
        return xi, eta

    def shift_index(self, offset: Optional[Sequence[int]] = None) -> np.ndarray:
        """Flat index of x + w for every flat x, with periodic wraparound"""
        idx = np.indices(self.shape).reshape(self.d, -1)
        if offset is not None:
            w = np.asarray(offset, dtype=int).reshape(-1)
            if w.size != self.d:
                raise GridError(f"offset {tuple(w)} is not a {self.d}-dimensional lattice vector")
            idx = (idx + w[:, None]) % self.n
        return np.ravel_multi_index(tuple(idx), self.shape)

    @cached_property
    def difference_index(self) -> np.ndarray:
        """Flat index of x - y for every (x, y) pair"""
        idx = np.indices(self.shape).reshape(self.d, -1)
        out = np.zeros((self.size, self.size), dtype=np.int64)
        for axis in range(self.d):
            out = out * self.n + (idx[axis][:, None] - idx[axis][None, :]) % self.n
        return out

    @cached_property
    def negation_index(self) -> np.ndarray:
        """Flat Fourier index of -xi for every flat xi"""
        idx = (-np.indices(self.shape).reshape(self.d, -1)) % self.n
        return np.ravel_multi_index(tuple(idx), self.shape)

    def check_same(self, other: "Grid") -> None:
        if self != other:
            raise GridError(f"grid mismatch: {self} vs {other}")


def make_grid(d: int, n: int, L: float) -> Grid:
    """
    Build a grid after checking the admissible ranges.

    Args:
        d: spatial dimension, 1 to 3
        n: points per axis, even, 8 <= n <= 256
        L: box side length, positive

    Returns:
        Grid
    """
    if d not in (1, 2, 3):
        raise GridError(f"dimension d={d} must be 1, 2 or 3", field="d")
    if int(n) != n or n % 2 or not 8 <= n <= 256:
        raise GridError(f"n={n} must be an even integer with 8 <= n <= 256", field="n")
    if not np.isfinite(L) or L <= 0:
        raise GridError(f"box length L={L} must be positive", field="L")
    return Grid(d=int(d), n=int(n), L=float(L))


def japanese(components: Sequence[np.ndarray], power: float = 1.0) -> np.ndarray:
    """<xi>**power with <xi> = (1 + |xi|^2)^(1/2)"""
    return (1.0 + sum(c**2 for c in components)) ** (0.5 * power)


def magnitude(components: Sequence[np.ndarray]) -> np.ndarray:
    return np.sqrt(sum(c**2 for c in components))


def _workers() -> int:
    return Runtime().fft_workers


def to_fourier(values: np.ndarray, grid: Grid, nvars: int) -> np.ndarray:
    """
    Forward FFT over the trailing nvars*d spatial axes.
    `values` has shape batch + (size,) * nvars; the result is reshaped to
    batch + shape * nvars.
    """
    batch = values.shape[: values.ndim - nvars]
    arr = values.reshape(batch + grid.shape * nvars)
    axes = tuple(range(len(batch), arr.ndim))
    return sfft.fftn(arr, axes=axes, workers=_workers())


def from_fourier(spectrum: np.ndarray, grid: Grid, nvars: int) -> np.ndarray:
    """Inverse of to_fourier, returning batch + (size,) * nvars"""
    batch = spectrum.shape[: spectrum.ndim - nvars * grid.d]
    axes = tuple(range(len(batch), spectrum.ndim))
    out = sfft.ifftn(spectrum, axes=axes, workers=_workers())
    return out.reshape(batch + (grid.size,) * nvars)


def field_weights(grid: Grid, weight: FieldWeight) -> np.ndarray:
    """Evaluate a one-variable Fourier weight on the grid (shape `shape`)"""
    w = weight(grid.xi) if callable(weight) else np.asarray(weight)
    w = np.broadcast_to(w, grid.shape)
    if not np.all(np.isfinite(w)):
        raise ValidationError("Fourier weight is not finite on the grid's wavenumbers", field="weight")
    return w


def kernel_weights(grid: Grid, weight: FieldWeight) -> np.ndarray:
    """Evaluate a two-variable weight w(xi, eta) (shape `shape + shape`)"""
    if callable(weight):
        xi, eta = grid.pair_xi()
        w = weight(xi, eta)
    else:
        w = np.asarray(weight)
    w = np.broadcast_to(w, grid.shape * 2)
    if not np.all(np.isfinite(w)):
        raise ValidationError("Fourier weight is not finite on the grid's wavenumbers", field="weight")
    return w


def apply_weights(values: np.ndarray, grid: Grid, weights: np.ndarray, nvars: int) -> np.ndarray:
    """Fourier multiplier on batched fields (nvars=1) or kernels (nvars=2)"""
    return from_fourier(to_fourier(values, grid, nvars) * weights, grid, nvars)


@dataclass(frozen=True, eq=False)
class Field:
    """Complex function of one grid variable"""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=complex).reshape(-1)
        if values.size != self.grid.size:
            raise GridError(f"field of length {values.size} does not match grid size {self.grid.size}")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.size, dtype=complex))

    @classmethod
    def from_function(cls, grid: Grid, func: Callable[..., np.ndarray]) -> "Field":
        return cls(grid, np.asarray(func(*grid.coordinates()), dtype=complex))

    def reshaped(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def conj(self) -> "Field":
        return Field(self.grid, self.values.conj())

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.cell))

    def integral(self) -> complex:
        return complex(np.sum(self.values) * self.grid.cell)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def __add__(self, other: "Field") -> "Field":
        self.grid.check_same(other.grid)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        self.grid.check_same(other.grid)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, scalar: complex) -> "Field":
        return Field(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class Kernel:
    """Complex function of two grid variables, K(x, y) = values[x, y]"""

    grid: Grid
    values: np.ndarray
    symmetry: SymmetryTag = "none"

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.grid.size, self.grid.size):
            raise GridError(f"kernel of shape {values.shape} does not match grid size {self.grid.size}")
        if self.symmetry not in SYMMETRY_TAGS:
            raise ValidationError(f"unknown symmetry tag {self.symmetry!r}", field="symmetry")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: Grid, symmetry: SymmetryTag = "none") -> "Kernel":
        return cls(grid, np.zeros((grid.size, grid.size), dtype=complex), symmetry)

    def reshaped(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape * 2)

    def retag(self, symmetry: SymmetryTag) -> "Kernel":
        return Kernel(self.grid, self.values, symmetry)

    @property
    def T(self) -> "Kernel":
        return Kernel(self.grid, self.values.T, self.symmetry)

    def conj(self) -> "Kernel":
        return Kernel(self.grid, self.values.conj(), self.symmetry)

    def adjoint(self) -> "Kernel":
        return Kernel(self.grid, self.values.conj().T, self.symmetry)

    def hs_norm(self) -> float:
        """Hilbert-Schmidt norm, an upper bound for the operator norm"""
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2)) * self.grid.cell)

    def l2_norm(self) -> float:
        """L2(dx dy) norm of the kernel as a function"""
        return self.hs_norm()

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def symmetry_residual(self, tag: Optional[SymmetryTag] = None) -> float:
        """Largest absolute deviation from the requested (or own) symmetry"""
        tag = tag or self.symmetry
        v = self.values
        if tag == "symmetric":
            return float(np.max(np.abs(v - v.T), initial=0.0))
        if tag == "hermitian":
            return float(np.max(np.abs(v - v.conj().T), initial=0.0))
        if tag == "antisymmetric":
            return float(np.max(np.abs(v + v.T), initial=0.0))
        return 0.0

    def __add__(self, other: "Kernel") -> "Kernel":
        self.grid.check_same(other.grid)
        tag = self.symmetry if self.symmetry == other.symmetry else "none"
        return Kernel(self.grid, self.values + other.values, tag)

    def __sub__(self, other: "Kernel") -> "Kernel":
        self.grid.check_same(other.grid)
        tag = self.symmetry if self.symmetry == other.symmetry else "none"
        return Kernel(self.grid, self.values - other.values, tag)

    def __mul__(self, scalar: complex) -> "Kernel":
        tag = self.symmetry
        if tag == "hermitian" and np.imag(scalar) != 0:
            tag = "none"
        return Kernel(self.grid, self.values * scalar, tag)

    __rmul__ = __mul__

    def __neg__(self) -> "Kernel":
        return Kernel(self.grid, -self.values, self.symmetry)


def delta_kernel(grid: Grid) -> Kernel:
    """Discrete delta, the identity for kernel_compose"""
    return Kernel(grid, np.eye(grid.size, dtype=complex) / grid.cell, "hermitian")


def outer(f: Field, g: Field, symmetry: SymmetryTag = "none") -> Kernel:
    """Rank-one kernel f(x) g(y)"""
    f.grid.check_same(g.grid)
    return Kernel(f.grid, np.outer(f.values, g.values), symmetry)


def fourier_multiplier(target: Union[Field, Kernel], weight: FieldWeight) -> Union[Field, Kernel]:
    """
    Apply a Fourier multiplier: inverse transform of weight times forward transform.

    For a Field, `weight(xi)` receives the d wavevector components on the
    full grid. For a Kernel, `weight(xi, eta)` receives components already
    broadcastable against each other (xi varies over the x slots, eta over y).
    """
    grid = target.grid
    if isinstance(target, Field):
        w = field_weights(grid, weight)
        return Field(grid, apply_weights(target.values, grid, w, 1))
    w = kernel_weights(grid, weight)
    return Kernel(grid, apply_weights(target.values, grid, w, 2))


def kernel_compose(A: Kernel, B: Kernel) -> Kernel:
    """(A o B)(x1, x2) = integral of A(x1, y) B(y, x2) dy"""
    A.grid.check_same(B.grid)
    return Kernel(A.grid, (A.values @ B.values) * A.grid.cell)


def kernel_trace(A: Kernel) -> complex:
    return complex(np.trace(A.values) * A.grid.cell)


def gradient_energy(f: Field) -> float:
    """Integral of |grad f|^2, evaluated spectrally"""
    grid = f.grid
    spectrum = to_fourier(f.values, grid, 1).reshape(-1)
    return float(np.sum(grid.k_squared.reshape(-1) * np.abs(spectrum) ** 2) * grid.cell / grid.size)


def kernel_gradient_energy(K: Kernel, variable: Optional[int] = None) -> float:
    """
    Integral of |grad_{x1} K|^2 + |grad_{x2} K|^2, or of a single variable's
    gradient when `variable` is 0 or 1.
    """
    grid = K.grid
    power = np.abs(to_fourier(K.values, grid, 2).reshape(grid.size, grid.size)) ** 2
    k2 = grid.k_squared.reshape(-1)
    total = 0.0
    if variable in (None, 0):
        total += float(np.sum(k2[:, None] * power))
    if variable in (None, 1):
        total += float(np.sum(k2[None, :] * power))
    return total * grid.cell**2 / grid.size**2


def kinetic_trace(G: Kernel) -> complex:
    """
    tr(grad_x . grad_y G), read off the anti-diagonal of the transform so
    that G = conj(f) f gives exactly gradient_energy(f).
    """
    grid = G.grid
    spectrum = to_fourier(G.values, grid, 2).reshape(grid.size, grid.size)
    rows = np.arange(grid.size)
    k2 = grid.k_squared.reshape(-1)
    return complex(np.sum(k2 * spectrum[rows, grid.negation_index]) * grid.cell / grid.size)


def kernel_diag(A: Kernel, offset: Optional[Sequence[int]] = None) -> Field:
    """x -> A(x, x + w) for a lattice offset w"""
    grid = A.grid
    rows = np.arange(grid.size)
    return Field(grid, A.values[rows, grid.shift_index(offset)])


def kernel_diag_shifted(A: Kernel, left: Sequence[int], right: Sequence[int]) -> Field:
    """x -> A(x + left, x + right); with (w, -w) this is the (x+w, x-w) slice"""
    grid = A.grid
    return Field(grid, A.values[grid.shift_index(left), grid.shift_index(right)])


def diag_index_pair(grid: Grid, offset: Sequence[int], convention: str = "shift") -> Tuple[np.ndarray, np.ndarray]:
    """Row/column indices of the diagonal slice for a convention"""
    if convention == "shift":
        return np.arange(grid.size), grid.shift_index(offset)
    if convention == "symmetric":
        neg = tuple(-int(w) for w in offset)
        return grid.shift_index(offset), grid.shift_index(neg)
    raise ValidationError(f"unknown diagonal convention {convention!r}", field="convention")


@dataclass(frozen=True)
class AffineKernel:
    """scalar * delta + dense part, composed exactly on the delta"""

    scalar: complex
    dense: Kernel

    @property
    def grid(self) -> Grid:
        return self.dense.grid

    def to_kernel(self) -> Kernel:
        return Kernel(self.grid, self.dense.values + self.scalar * np.eye(self.grid.size) / self.grid.cell)

    def conj(self) -> "AffineKernel":
        return AffineKernel(np.conj(self.scalar), self.dense.conj())

    def compose(self, other: Union["AffineKernel", Kernel]) -> Union["AffineKernel", Kernel]:
        if isinstance(other, Kernel):
            return Kernel(self.grid, self.scalar * other.values) + kernel_compose(self.dense, other)
        dense = (
            Kernel(self.grid, self.scalar * other.dense.values + other.scalar * self.dense.values)
            + kernel_compose(self.dense, other.dense)
        )
        return AffineKernel(self.scalar * other.scalar, dense)

    def rcompose(self, other: Kernel) -> Kernel:
        """other o self"""
        return Kernel(self.grid, self.scalar * other.values) + kernel_compose(other, self.dense)


@dataclass(frozen=True)
class TimeSpectrum:
    """
    Windowed, zero-padded time transform with convention
    f_hat(tau) = integral of e^{-i tau t} c(t) f(t) dt.
    Sums over tau carry the measure 1 / (P dt), i.e. dtau / (2 pi).
    """

    tau: np.ndarray
    values: np.ndarray
    dt: float

    @property
    def measure(self) -> float:
        return 1.0 / (self.tau.size * self.dt)


def uniform_step(times: np.ndarray, rtol: float = 1e-9) -> float:
    times = np.asarray(times, dtype=float)
    if times.size < 2:
        raise ValidationError("a time series needs at least two samples", field="times")
    steps = np.diff(times)
    dt = float(np.mean(steps))
    if dt <= 0 or np.max(np.abs(steps - dt)) > rtol * max(1.0, abs(dt)) + 1e-12:
        raise ValidationError("time samples are not uniformly spaced", field="times")
    return dt


def window_mask(times: np.ndarray, T: Optional[float]) -> np.ndarray:
    """Samples in the half-open window [0, T); None selects everything"""
    times = np.asarray(times, dtype=float)
    if T is None:
        return np.ones(times.size, dtype=bool)
    dt = uniform_step(times)
    if T > times[-1] + 0.5 * dt or times[0] > 0.5 * dt:
        raise ValidationError(f"window [0, {T}] is not inside the stored range [{times[0]}, {times[-1]}]", field="T")
    return (times > -0.5 * dt) & (times < T - 0.5 * dt)


def time_fourier(times: np.ndarray, samples: np.ndarray, T: Optional[float] = None, pad: int = 4) -> TimeSpectrum:
    """
    Transform samples (time on axis 0) multiplied by the sharp window of [0, T).

    Args:
        times: uniform sample times
        samples: array whose first axis matches times
        T: window length; None uses all samples
        pad: zero-padding factor, at least 4

    Returns:
        TimeSpectrum with tau in FFT order
    """
    if pad < 4:
        raise ValidationError(f"zero-padding factor {pad} must be at least 4", field="pad")
    times = np.asarray(times, dtype=float)
    samples = np.asarray(samples)
    if samples.shape[0] != times.size:
        raise ValidationError("samples and times disagree in length", field="samples")
    dt = uniform_step(times)
    mask = window_mask(times, T)
    selected = samples[mask]
    t0 = times[mask][0] if selected.shape[0] else 0.0
    P = pad * max(1, selected.shape[0])
    tau = 2.0 * np.pi * np.fft.fftfreq(P, d=dt)
    values = dt * sfft.fft(selected, n=P, axis=0, workers=_workers())
    if t0 != 0.0:
        phase = np.exp(-1j * tau * t0).reshape((P,) + (1,) * (values.ndim - 1))
        values = values * phase
    return TimeSpectrum(tau=tau, values=values, dt=dt)
