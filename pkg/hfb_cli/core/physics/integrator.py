"""
Fixed-step time evolution.

Strang splitting uses exact Fourier flows for the Laplacians, an exact
pointwise phase for the (v_N / N) Lambda multiplier and an exponential
midpoint rule for the nonlinear terms. The rk4 scheme is a Lawson
(integrating-factor) Runge-Kutta method on the same splitting, used as the
reference integrator.
"""
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field as PydanticField, field_validator

from hfb_cli.core.errors import NumericalBlowupError, StepRejectedError, ValidationError
from hfb_cli.core.physics.conserved import energy, fermi_conserved
from hfb_cli.core.physics.hfb_state import HFBState
from hfb_cli.core.physics.lattice import Field, Grid, Kernel, apply_weights
from hfb_cli.core.physics.potentials import PotentialContext, pair_values, potential_context
from hfb_cli.core.physics.rhs import Arrays, bracket_arrays, convolve, direct_arrays, fermi_arrays
from hfb_cli.core.physics.trace import SpaceTimeTrace, TraceRecorder, default_offsets

SYMMETRY_REJECT_TOL = 1e-6

StepSink = Callable[[HFBState], None]


class SchemeConfig(BaseModel):
    """Time-stepping parameters and trace layout"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    scheme: Literal["strang", "rk4"] = "strang"
    dt: float = PydanticField(1e-3, gt=0.0)
    T: float = PydanticField(0.1, ge=0.0)
    store_every: int = PydanticField(1, ge=1)
    offsets: Optional[Tuple[Tuple[int, ...], ...]] = None
    offset_stride: int = PydanticField(1, ge=1)
    assembler: Literal["direct", "bracket"] = "direct"
    nonlinear: bool = True
    track_conserved: bool = True

    @field_validator("offsets")
    @classmethod
    def _offsets_nonempty(cls, value: Optional[Tuple[Tuple[int, ...], ...]]) -> Optional[Tuple[Tuple[int, ...], ...]]:
        if value is not None and len(value) == 0:
            raise ValueError("offsets must not be empty")
        return value

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    def check_integral(self) -> None:
        if abs(self.steps * self.dt - self.T) > 1e-9 * max(1.0, self.T):
            raise ValidationError(f"T={self.T} is not an integer multiple of dt={self.dt}", field="T")

    def offsets_for(self, grid: Grid) -> List[Tuple[int, ...]]:
        if self.offsets is not None:
            return [tuple(w) for w in self.offsets]
        return default_offsets(grid, self.offset_stride)


@lru_cache(maxsize=32)
def linear_weights(grid: Grid, h: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fourier multipliers of the free flows of phi, Lambda and (stored) Gamma over time h"""
    xi2 = grid.k_squared
    pad = (1,) * grid.d
    left = xi2.reshape(grid.shape + pad)
    right = xi2.reshape(pad + grid.shape)
    return (
        np.exp(-1j * h * xi2),
        np.exp(-1j * h * (left + right)),
        np.exp(1j * h * (left - right)),
    )


def _apply_linear(arrays: Arrays, grid: Grid, h: float) -> Arrays:
    w_phi, w_lam, w_gamma = linear_weights(grid, h)
    phi, lam, gamma = arrays
    return (
        apply_weights(phi, grid, w_phi, 1),
        apply_weights(lam, grid, w_lam, 2),
        apply_weights(gamma, grid, w_gamma, 2),
    )


def _potential_phase(ctx: PotentialContext, big_n: float, h: float) -> np.ndarray:
    return np.exp(-1j * h * ctx.pair / big_n)


def linear_propagator(state: HFBState, dt: float) -> HFBState:
    """Exact free flow over dt; t is not advanced"""
    return state.with_arrays(*_apply_linear(state.arrays(), state.grid, dt))


def potential_flow(state: HFBState, dt: float) -> HFBState:
    """Lambda(x, y) <- exp(-i dt v_N(x - y) / N) Lambda(x, y); t is not advanced"""
    ctx = potential_context(state.spec, state.grid)
    phi, lam, gamma = state.arrays()
    return state.with_arrays(phi, _potential_phase(ctx, state.big_n, dt) * lam, gamma)


def _assembler(name: str) -> Callable[[np.ndarray, np.ndarray, np.ndarray, PotentialContext], Arrays]:
    if name == "bracket":
        return bracket_arrays
    return direct_arrays


class _VectorField:
    """Nonlinear (and optionally potential) part of the time derivative"""

    def __init__(self, state: HFBState, assembler: str = "direct", nonlinear: bool = True) -> None:
        self.grid = state.grid
        self.big_n = state.big_n
        self.ctx = potential_context(state.spec, state.grid)
        self.assemble = _assembler(assembler)
        self.nonlinear = nonlinear

    def nonlinear_part(self, arrays: Arrays) -> Arrays:
        phi, lam, gamma = arrays
        if not self.nonlinear:
            return np.zeros_like(phi), np.zeros_like(lam), np.zeros_like(gamma)
        r_phi, r_lam, r_gb = self.assemble(phi, lam, gamma, self.ctx)
        return 1j * r_phi, 1j * r_lam, -1j * r_gb.conj()

    def with_potential(self, arrays: Arrays) -> Arrays:
        d_phi, d_lam, d_gamma = self.nonlinear_part(arrays)
        return d_phi, d_lam - 1j * (self.ctx.pair / self.big_n) * arrays[1], d_gamma

    def diagonal_rates(self, arrays: Arrays) -> Arrays:
        """Pointwise multipliers of the Hartree-type terms, frozen at `arrays`"""
        phi, _, gamma = arrays
        if not self.nonlinear:
            z = np.zeros(self.grid.size, dtype=complex)
            return z, np.zeros_like(gamma), np.zeros_like(gamma)
        v = self.ctx.vN.values
        v1 = convolve(v, np.diagonal(gamma).copy(), self.grid)
        w = convolve(v, np.abs(phi) ** 2, self.grid)
        return (
            1j * (-v1 + 2.0 * w),
            -1j * (v1[:, None] + v1[None, :]),
            1j * (v1[:, None] - v1[None, :]),
        )


def _axpy(x: Arrays, h: complex, y: Arrays) -> Arrays:
    return tuple(a + h * b for a, b in zip(x, y))  # type: ignore[return-value]


def _nonlinear_substep(field: _VectorField, arrays: Arrays, h: float) -> Arrays:
    mid = _axpy(arrays, 0.5 * h, field.nonlinear_part(arrays))
    rates = field.diagonal_rates(mid)
    n_mid = field.nonlinear_part(mid)
    out = []
    for x, xm, d, n in zip(arrays, mid, rates, n_mid):
        out.append(np.exp(h * d) * x + h * np.exp(0.5 * h * d) * (n - d * xm))
    return tuple(out)  # type: ignore[return-value]


def _finalize(state: HFBState, arrays: Arrays, dt: float) -> HFBState:
    phi, lam, gamma = arrays
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(lam)) and np.all(np.isfinite(gamma))):
        raise NumericalBlowupError(
            f"non-finite values after the step from t={state.t:.6g}", last_good=state, help_text="reduce dt"
        )
    residual = max(
        float(np.max(np.abs(lam - lam.T), initial=0.0)),
        float(np.max(np.abs(gamma - gamma.conj().T), initial=0.0)),
    )
    if residual > SYMMETRY_REJECT_TOL:
        raise StepRejectedError(
            f"symmetry residual {residual:.3e} after step from t={state.t:.6g}", residual=residual, help_text="reduce dt"
        )
    lam = 0.5 * (lam + lam.T)
    gamma = 0.5 * (gamma + gamma.conj().T)
    return state.with_arrays(phi, lam, gamma, t=state.t + dt)


def step_strang(state: HFBState, dt: float, assembler: str = "direct", nonlinear: bool = True) -> HFBState:
    """half linear, half potential, nonlinear, half potential, half linear"""
    field = _VectorField(state, assembler, nonlinear)
    grid = state.grid
    half_phase = _potential_phase(field.ctx, state.big_n, 0.5 * dt)

    phi, lam, gamma = _apply_linear(state.arrays(), grid, 0.5 * dt)
    arrays = (phi, half_phase * lam, gamma)
    phi, lam, gamma = _nonlinear_substep(field, arrays, dt)
    arrays = _apply_linear((phi, half_phase * lam, gamma), grid, 0.5 * dt)
    return _finalize(state, arrays, dt)


def step_rk4(state: HFBState, dt: float, assembler: str = "direct", nonlinear: bool = True) -> HFBState:
    """Integrating-factor RK4 with the free flows as integrating factor"""
    field = _VectorField(state, assembler, nonlinear)
    grid = state.grid
    x = state.arrays()
    half = lambda arrays: _apply_linear(arrays, grid, 0.5 * dt)  # noqa: E731
    full = lambda arrays: _apply_linear(arrays, grid, dt)  # noqa: E731

    k1 = field.with_potential(x)
    x_half = half(x)
    k2 = field.with_potential(half(_axpy(x, 0.5 * dt, k1)))
    k3 = field.with_potential(_axpy(x_half, 0.5 * dt, k2))
    k4 = field.with_potential(_axpy(full(x), dt, half(k3)))

    e_k1 = full(k1)
    e_mid = half(_axpy(k2, 1.0, k3))
    base = full(x)
    arrays = tuple(
        b + dt / 6.0 * (a1 + 2.0 * am + a4) for b, a1, am, a4 in zip(base, e_k1, e_mid, k4)
    )
    return _finalize(state, arrays, dt)  # type: ignore[arg-type]


STEPPERS = {"strang": step_strang, "rk4": step_rk4}


def evolve(
    state: HFBState,
    scheme: SchemeConfig,
    sinks: Sequence[StepSink] = (),
    on_step: Optional[Callable[[int, int], None]] = None,
) -> SpaceTimeTrace:
    """
    March `scheme.steps` fixed steps, recording the trace and, when enabled,
    the conserved quantities of every stored state.

    Raises:
        NumericalBlowupError: carries the last good state and the partial trace
    """
    scheme.check_integral()
    stepper = STEPPERS[scheme.scheme]
    recorder = TraceRecorder(state.grid, scheme.offsets_for(state.grid), scheme.store_every)
    conserved_rows: List[dict] = []

    def observe(current: HFBState) -> None:
        recorder.record(current)
        if scheme.track_conserved:
            conserved_rows.append(energy(current).as_row())
        for sink in sinks:
            sink(current)

    def metadata() -> dict:
        return {"scheme": scheme.scheme, "dt": scheme.dt, "conserved": list(conserved_rows)}

    t0 = state.t
    current = replace(state)
    observe(current)
    total = scheme.steps
    for step in range(total):
        try:
            current = stepper(current, scheme.dt, scheme.assembler, scheme.nonlinear)
        except NumericalBlowupError as exc:
            exc.partial_trace = recorder.build(metadata())
            raise
        current = replace(current, t=t0 + (step + 1) * scheme.dt)
        observe(current)
        if on_step is not None:
            on_step(step + 1, total)
    trace = recorder.build(metadata())
    trace.final_state = current
    return trace


@dataclass(frozen=True, eq=False)
class FermiState:
    """(omega, psi) for the aligned-Fermion system with its interaction"""

    t: float
    omega: Kernel
    psi: Kernel
    v: Field

    @property
    def grid(self) -> Grid:
        return self.omega.grid


def bcs_pair_state(
    grid: Grid,
    v: Field,
    modes: Sequence[Sequence[int]],
    angles: Sequence[float],
    t: float = 0.0,
) -> FermiState:
    """
    Constrained (omega, psi) built from plane-wave pairs (k, -k): with
    a = e^{ik.x} / |box|^{1/2}, u = cos(theta), v = sin(theta),

        omega = 2 sum v^2 (a a* + a* a),   psi = 2 sum u v (a a* - a* a)

    so that omega o omega - psi o conj(psi) = 2 omega.
    """
    if len(modes) != len(angles):
        raise ValidationError("one angle per pair mode is required", field="angles")
    x = grid.flat_coordinates()
    omega = np.zeros((grid.size, grid.size), dtype=complex)
    psi = np.zeros_like(omega)
    seen = set()
    for m, theta in zip(modes, angles):
        m = tuple(int(c) % grid.n for c in m)
        neg = tuple((-c) % grid.n for c in m)
        if len(m) != grid.d or m == neg or m in seen or neg in seen:
            raise ValidationError(f"pair mode {m} is zero, a Nyquist mode or repeated", field="modes")
        seen.add(m)
        k = (2.0 * np.pi / grid.L) * np.asarray(m, dtype=float)
        a = np.exp(1j * x @ k) / np.sqrt(grid.volume)
        a_bar = a.conj()
        u, s = np.cos(theta), np.sin(theta)
        omega += 2.0 * s * s * (np.outer(a, a_bar) + np.outer(a_bar, a))
        psi += 2.0 * u * s * (np.outer(a, a_bar) - np.outer(a_bar, a))
    return FermiState(t, Kernel(grid, omega, "hermitian"), Kernel(grid, psi, "antisymmetric"), v)


@lru_cache(maxsize=32)
def fermi_weights(grid: Grid, h: float) -> Tuple[np.ndarray, np.ndarray]:
    _, w_lam, w_gamma = linear_weights(grid, h)
    return w_gamma, w_lam.conj()


def _fermi_linear(arrays: Tuple[np.ndarray, np.ndarray], grid: Grid, h: float) -> Tuple[np.ndarray, np.ndarray]:
    w_omega, w_psi = fermi_weights(grid, h)
    return apply_weights(arrays[0], grid, w_omega, 2), apply_weights(arrays[1], grid, w_psi, 2)


def step_fermi(state: FermiState, dt: float, pair: Optional[np.ndarray] = None) -> FermiState:
    """One integrating-factor RK4 step of the Fermionic system"""
    grid = state.grid
    V = pair if pair is not None else pair_values(state.v)
    v = state.v.values

    def field(arrays: Tuple[np.ndarray, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
        d_omega, d_psi = fermi_arrays(arrays[0], arrays[1], v, V, grid)
        return 1j * d_omega, 1j * d_psi

    def lin(arrays: Tuple[np.ndarray, np.ndarray], h: float) -> Tuple[np.ndarray, np.ndarray]:
        return _fermi_linear(arrays, grid, h)

    x = (state.omega.values, state.psi.values)
    k1 = field(x)
    k2 = field(lin(tuple(a + 0.5 * dt * b for a, b in zip(x, k1)), 0.5 * dt))  # type: ignore[arg-type]
    k3 = field(tuple(a + 0.5 * dt * b for a, b in zip(lin(x, 0.5 * dt), k2)))  # type: ignore[arg-type]
    k4 = field(tuple(a + dt * b for a, b in zip(lin(x, dt), lin(k3, 0.5 * dt))))  # type: ignore[arg-type]
    e_k1 = lin(k1, dt)
    e_mid = lin((k2[0] + k3[0], k2[1] + k3[1]), 0.5 * dt)
    base = lin(x, dt)
    omega, psi = (b + dt / 6.0 * (a1 + 2.0 * am + a4) for b, a1, am, a4 in zip(base, e_k1, e_mid, k4))
    if not (np.all(np.isfinite(omega)) and np.all(np.isfinite(psi))):
        raise NumericalBlowupError(f"non-finite fermionic state after t={state.t:.6g}", last_good=state)
    omega = 0.5 * (omega + omega.conj().T)
    psi = 0.5 * (psi - psi.T)
    return FermiState(state.t + dt, Kernel(grid, omega, "hermitian"), Kernel(grid, psi, "antisymmetric"), state.v)


def evolve_fermi(state: FermiState, dt: float, T: float) -> Tuple[FermiState, List[dict]]:
    """Evolve to T, returning the final state and one conserved row per step"""
    steps = int(round(T / dt))
    if steps < 0 or abs(steps * dt - T) > 1e-9 * max(1.0, T):
        raise ValidationError(f"T={T} is not an integer multiple of dt={dt}", field="T")
    V = pair_values(state.v)
    rows = [fermi_conserved(state.omega, state.psi, state.v).as_row(state.t)]
    t0 = state.t
    current = state
    for step in range(steps):
        current = step_fermi(current, dt, V)
        current = replace(current, t=t0 + (step + 1) * dt)
        rows.append(fermi_conserved(current.omega, current.psi, current.v).as_row(current.t))
    return current, rows
