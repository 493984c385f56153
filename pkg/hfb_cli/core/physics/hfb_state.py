"""
The evolved state (phi, Lambda, Gamma) and its pair-excitation initial data.
"""
from dataclasses import dataclass, field, replace
from math import factorial
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
from pydantic import BaseModel, ConfigDict, Field as PydanticField

from hfb_cli.core.errors import SeriesError, ValidationError
from hfb_cli.core.physics.lattice import (
    AffineKernel,
    Field,
    Grid,
    Kernel,
    from_fourier,
    gradient_energy,
    kernel_compose,
    kernel_gradient_energy,
    kernel_trace,
    kinetic_trace,
    outer,
)
from hfb_cli.core.physics.potentials import PotentialSpec

DEFAULT_DEPTH = 8
SERIES_TAIL_TOL = 1e-12
SERIES_DIVERGENCE_NORM = 10.0


@dataclass(frozen=True, eq=False)
class HFBState:
    """Time-stamped triple (phi, Lambda, Gamma) with its scaling parameters"""

    t: float
    phi: Field
    lam: Kernel
    gamma: Kernel
    spec: PotentialSpec

    @property
    def grid(self) -> Grid:
        return self.phi.grid

    @property
    def big_n(self) -> float:
        return self.spec.big_n

    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.phi.values, self.lam.values, self.gamma.values

    def with_arrays(self, phi: np.ndarray, lam: np.ndarray, gamma: np.ndarray, t: Optional[float] = None) -> "HFBState":
        grid = self.grid
        return HFBState(
            t=self.t if t is None else float(t),
            phi=Field(grid, phi),
            lam=Kernel(grid, lam, "symmetric"),
            gamma=Kernel(grid, gamma, "hermitian"),
            spec=self.spec,
        )

    def scaled(self, factor: complex) -> "HFBState":
        return replace(self, phi=self.phi * factor, lam=self.lam * factor, gamma=self.gamma * abs(factor))

    def is_finite(self) -> bool:
        return self.phi.is_finite() and self.lam.is_finite() and self.gamma.is_finite()

    @classmethod
    def zeros(cls, grid: Grid, spec: PotentialSpec) -> "HFBState":
        return cls(0.0, Field.zeros(grid), Kernel.zeros(grid, "symmetric"), Kernel.zeros(grid, "hermitian"), spec)


@dataclass(frozen=True)
class PairExcitation:
    """Symmetric pair-excitation kernel k with its series depth"""

    k: Kernel
    depth: int = DEFAULT_DEPTH

    def series(self) -> Tuple[Kernel, AffineKernel]:
        return sh_ch_series(self.k, self.depth)


def required_depth(norm: float, tol: float = SERIES_TAIL_TOL) -> int:
    """Smallest depth p with norm^(2p+1) / (2p+1)! below tol"""
    p = 1
    while norm ** (2 * p + 1) / factorial(2 * p + 1) > tol:
        p += 1
    return p


def sh_ch_series(k: Kernel, depth: int = DEFAULT_DEPTH) -> Tuple[Kernel, AffineKernel]:
    """
    Truncated sh(k) = sum_j (k kbar)^j k / (2j+1)! and
    ch(k) = delta + sum_j (kbar k)^j / (2j)!, with the delta kept symbolic.

    Raises:
        SeriesError: norm above the divergence guard, or a tail above 1e-12
    """
    if depth < 1:
        raise ValidationError(f"series depth {depth} must be at least 1", field="depth")
    norm = k.hs_norm()
    if norm > SERIES_DIVERGENCE_NORM:
        raise SeriesError(
            f"pair kernel norm {norm:.4g} exceeds the divergence guard {SERIES_DIVERGENCE_NORM}",
            help_text="reduce the pair-excitation strength",
        )
    tail = norm ** (2 * depth + 1) / factorial(2 * depth + 1)
    if tail > SERIES_TAIL_TOL:
        needed = required_depth(norm)
        raise SeriesError(
            f"series tail {tail:.3e} at depth {depth} exceeds {SERIES_TAIL_TOL:g}",
            required_depth=needed,
            help_text=f"use depth >= {needed}",
        )

    grid = k.grid
    k_bar = k.conj()
    k_kbar = kernel_compose(k, k_bar)
    kbar_k = kernel_compose(k_bar, k)

    term = k
    u_values = k.values.copy()
    power = kbar_k
    c_dense = np.zeros_like(k.values)
    for j in range(1, depth + 1):
        if j < depth:
            term = kernel_compose(k_kbar, term)
            u_values += term.values / factorial(2 * j + 1)
        if j > 1:
            power = kernel_compose(kbar_k, power)
        c_dense += power.values / factorial(2 * j)

    u = Kernel(grid, u_values, "symmetric")
    c = AffineKernel(1.0, Kernel(grid, c_dense, "hermitian"))
    return u, c


def closure_identity_residual(u: Kernel, c: AffineKernel) -> float:
    """Hilbert-Schmidt size of c o c - ubar o u - delta"""
    cc = c.compose(c)
    if abs(cc.scalar - 1.0) > 1e-14:
        raise ValidationError("ch series must have unit delta part", field="c")
    residual = cc.dense - kernel_compose(u.conj(), u)
    return residual.hs_norm()


def _hermitize(values: np.ndarray) -> np.ndarray:
    return 0.5 * (values + values.conj().T)


def _symmetrize(values: np.ndarray) -> np.ndarray:
    return 0.5 * (values + values.T)


def from_pair_excitation(phi: Field, k: Kernel, spec: PotentialSpec, depth: int = DEFAULT_DEPTH, t: float = 0.0) -> HFBState:
    """
    Gamma = conj(phi) phi + ubar o u / N and Lambda = phi phi + sh(2k) / (2N),
    with sh(2k) = 2 u o c.
    """
    phi.grid.check_same(k.grid)
    u, c = sh_ch_series(k, depth)
    big_n = spec.big_n
    psi = c.rcompose(u) * 2.0
    gamma = outer(phi.conj(), phi).values + kernel_compose(u.conj(), u).values / big_n
    lam = outer(phi, phi).values + psi.values / (2.0 * big_n)
    grid = phi.grid
    return HFBState(
        t=t,
        phi=phi,
        lam=Kernel(grid, _symmetrize(lam), "symmetric"),
        gamma=Kernel(grid, _hermitize(gamma), "hermitian"),
        spec=spec,
    )


def coherent_state(phi: Field, spec: PotentialSpec, t: float = 0.0) -> HFBState:
    """k = 0: Lambda = phi phi, Gamma = conj(phi) phi"""
    return from_pair_excitation(phi, Kernel.zeros(phi.grid, "symmetric"), spec, depth=1, t=t)


def psd_margin(state: HFBState) -> float:
    """Smallest eigenvalue of Gamma - conj(phi) phi as an operator"""
    fluct = state.gamma.values - np.outer(state.phi.values.conj(), state.phi.values)
    eigs = sla.eigvalsh(_hermitize(fluct) * state.grid.cell)
    return float(eigs[0])


def pair_closure_residual(state: HFBState) -> float:
    """
    Hilbert-Schmidt size of a o conj(a) - conj(g) / N - conj(g) o conj(g)
    with a = Lambda - phi phi and g = Gamma - conj(phi) phi; zero for
    pair-excitation states.
    """
    phi = state.phi.values
    grid = state.grid
    alpha = Kernel(grid, state.lam.values - np.outer(phi, phi))
    g_bar = Kernel(grid, (state.gamma.values - np.outer(phi.conj(), phi)).conj())
    residual = kernel_compose(alpha, alpha.conj()) - g_bar * (1.0 / state.big_n) - kernel_compose(g_bar, g_bar)
    return residual.hs_norm()


@dataclass
class InvariantCheck:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual)) and self.residual <= self.tolerance


@dataclass
class StateReport:
    """Measured residual of every state invariant"""

    checks: List[InvariantCheck] = field(default_factory=list)

    @property
    def violations(self) -> List[InvariantCheck]:
        return [check for check in self.checks if not check.passed]

    @property
    def ok(self) -> bool:
        return not self.violations

    def residual(self, name: str) -> float:
        for check in self.checks:
            if check.name == name:
                return check.residual
        raise KeyError(name)


def validate(state: HFBState, tol: float = 1e-10, psd_tol: Optional[float] = 1e-9) -> StateReport:
    """
    Check symmetry of Lambda, Hermiticity of Gamma, finiteness, the
    pair-excitation closure and, unless psd_tol is None, Gamma >= conj(phi) phi.
    """
    report = StateReport()
    finite = 0.0 if state.is_finite() else float("inf")
    report.checks.append(InvariantCheck("finite", finite, 0.0))
    report.checks.append(InvariantCheck("lambda_symmetric", state.lam.symmetry_residual("symmetric"), tol))
    report.checks.append(InvariantCheck("gamma_hermitian", state.gamma.symmetry_residual("hermitian"), tol))
    trace = kernel_trace(state.gamma)
    report.checks.append(InvariantCheck("trace_real", abs(trace.imag) if np.isfinite(trace) else float("inf"), 1e-8))
    if state.is_finite():
        report.checks.append(InvariantCheck("pair_closure", pair_closure_residual(state), tol))
    if psd_tol is not None and state.is_finite():
        report.checks.append(InvariantCheck("gamma_psd", max(0.0, -psd_margin(state)), psd_tol))
    return report


def pair_gradient_inequality(k: Kernel, depth: int = DEFAULT_DEPTH) -> Tuple[float, float]:
    """
    Both sides of grad-energy(psi) <= 4 grad-energy(u) (1 + ||u||^2)
    for psi = 2 u o c.
    """
    u, c = sh_ch_series(k, depth)
    psi = c.rcompose(u) * 2.0
    lhs = kernel_gradient_energy(psi)
    rhs = 4.0 * kernel_gradient_energy(u) * (1.0 + u.hs_norm() ** 2)
    return lhs, rhs


def kinetic_decomposition(phi: Field, k: Kernel, spec: PotentialSpec, depth: int = DEFAULT_DEPTH) -> Tuple[float, float]:
    """
    tr(grad.grad Gamma) against |grad phi|^2 + (1/2N) grad-energy(u)
    for the pair-excitation state built from (phi, k).
    """
    state = from_pair_excitation(phi, k, spec, depth)
    u, _ = sh_ch_series(k, depth)
    lhs = kinetic_trace(state.gamma).real
    rhs = gradient_energy(phi) + kernel_gradient_energy(u) / (2.0 * spec.big_n)
    return lhs, rhs


class InitialDataRecipe(BaseModel):
    """Named phi and k profiles with their parameters"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    phi_profile: Literal["gaussian", "plane_waves"] = "gaussian"
    phi_width: float = PydanticField(0.6, gt=0.0)
    phi_center: Optional[Tuple[float, ...]] = None
    phi_momentum: Tuple[int, ...] = ()
    phi_amplitude: float = 1.0
    normalize: bool = True
    plane_wave_modes: Tuple[Tuple[int, ...], ...] = ((0,), (1,))
    plane_wave_weights: Tuple[float, ...] = (1.0, 0.5)
    k_profile: Literal["zero", "rank1", "gaussian", "random"] = "zero"
    k_strength: float = PydanticField(0.1, ge=0.0)
    k_width: float = PydanticField(0.5, gt=0.0)
    k_modes: int = PydanticField(2, ge=0)
    depth: int = PydanticField(DEFAULT_DEPTH, ge=1)


def _periodic_offsets(grid: Grid, center: Sequence[float]) -> List[np.ndarray]:
    coords = grid.coordinates()
    return [(c - c0 + 0.5 * grid.L) % grid.L - 0.5 * grid.L for c, c0 in zip(coords, center)]


def _lattice_vector(grid: Grid, modes: Sequence[int]) -> Tuple[int, ...]:
    modes = tuple(int(m) for m in modes)
    if len(modes) == 1 and grid.d > 1:
        modes = modes + (0,) * (grid.d - 1)
    if len(modes) != grid.d:
        raise ValidationError(f"mode {modes} is not a {grid.d}-dimensional lattice vector", field="modes")
    return modes


def gaussian_profile(grid: Grid, width: float, center: Optional[Sequence[float]] = None) -> np.ndarray:
    """Real Gaussian centred in the box, using minimum-image distances"""
    center = center if center is not None else (0.5 * grid.L,) * grid.d
    if len(center) != grid.d:
        raise ValidationError(f"center {tuple(center)} does not match d={grid.d}", field="phi_center")
    offsets = _periodic_offsets(grid, center)
    r2 = sum(o**2 for o in offsets)
    return np.exp(-r2 / (2.0 * width**2)).reshape(-1)


def build_phi(recipe: InitialDataRecipe, grid: Grid) -> Field:
    coords = grid.coordinates()
    if recipe.phi_profile == "gaussian":
        values = gaussian_profile(grid, recipe.phi_width, recipe.phi_center).astype(complex)
        if recipe.phi_momentum:
            m = _lattice_vector(grid, recipe.phi_momentum)
            phase = sum(2.0 * np.pi * mj / grid.L * c for mj, c in zip(m, coords))
            values = values * np.exp(1j * phase).reshape(-1)
    else:
        if len(recipe.plane_wave_modes) != len(recipe.plane_wave_weights):
            raise ValidationError("plane_wave_modes and plane_wave_weights differ in length", field="plane_wave_weights")
        values = np.zeros(grid.size, dtype=complex)
        for modes, weight in zip(recipe.plane_wave_modes, recipe.plane_wave_weights):
            m = _lattice_vector(grid, modes)
            phase = sum(2.0 * np.pi * mj / grid.L * c for mj, c in zip(m, coords))
            values += weight * np.exp(1j * phase).reshape(-1)
    phi = Field(grid, values)
    if recipe.normalize:
        norm = phi.l2_norm()
        if norm == 0:
            raise ValidationError("phi profile vanishes on the grid", field="phi_profile")
        phi = phi * (1.0 / norm)
    return phi * recipe.phi_amplitude


def _scale_to(values: np.ndarray, grid: Grid, strength: float) -> Kernel:
    kernel = Kernel(grid, _symmetrize(values), "symmetric")
    norm = kernel.hs_norm()
    if norm == 0:
        return Kernel.zeros(grid, "symmetric")
    return kernel * (strength / norm)


def build_k(recipe: InitialDataRecipe, grid: Grid, rng: Optional[np.random.Generator] = None) -> Kernel:
    """Pair kernel of Hilbert-Schmidt norm k_strength"""
    if recipe.k_profile == "zero" or recipe.k_strength == 0:
        return Kernel.zeros(grid, "symmetric")
    g = gaussian_profile(grid, recipe.k_width, recipe.phi_center)
    if recipe.k_profile == "rank1":
        return _scale_to(np.outer(g, g).astype(complex), grid, recipe.k_strength)
    if recipe.k_profile == "gaussian":
        points = grid.flat_coordinates()
        diff = (points[:, None, :] - points[None, :, :] + 0.5 * grid.L) % grid.L - 0.5 * grid.L
        near = np.exp(-np.sum(diff**2, axis=-1) / (2.0 * recipe.k_width**2))
        return _scale_to(near * np.outer(g, g), grid, recipe.k_strength)

    rng = rng if rng is not None else np.random.default_rng(0)
    spectrum = np.zeros(grid.shape * 2, dtype=complex)
    band = np.arange(-recipe.k_modes, recipe.k_modes + 1) % grid.n
    index = np.ix_(*([band] * (2 * grid.d)))
    block = spectrum[index]
    spectrum[index] = rng.standard_normal(block.shape) + 1j * rng.standard_normal(block.shape)
    values = from_fourier(spectrum, grid, 2)
    return _scale_to(values, grid, recipe.k_strength)


def instantiate(recipe: InitialDataRecipe, grid: Grid, spec: PotentialSpec, seed: int = 0) -> HFBState:
    """Initial state for one N; identical (phi, k) across N for a fixed seed"""
    rng = np.random.default_rng(seed)
    phi = build_phi(recipe, grid)
    k = build_k(recipe, grid, rng)
    return from_pair_excitation(phi, k, spec, recipe.depth)
