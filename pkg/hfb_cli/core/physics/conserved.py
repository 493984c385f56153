"""
Conserved quantities: particle number M = tr Gamma and the energy per particle.
"""
from dataclasses import asdict, dataclass
from typing import Dict, Optional

import numpy as np

from hfb_cli.core.errors import log_warning
from hfb_cli.core.physics.hfb_state import HFBState
from hfb_cli.core.physics.lattice import Field, Kernel, kernel_trace, kinetic_trace
from hfb_cli.core.physics.potentials import pair_values, potential_context
from hfb_cli.core.physics.rhs import convolve

HERMITICITY_TRACE_TOL = 1e-8

CONSERVED_COLUMNS = ("t", "mass", "mass_imag", "energy", "kinetic", "pair", "exchange", "direct", "condensate", "correlation")


@dataclass(frozen=True)
class ConservedReport:
    t: float
    mass: float
    mass_imag: float
    energy: float
    kinetic: float
    pair: float
    exchange: float
    direct: float
    condensate: float
    correlation: float

    def as_row(self) -> Dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class FermiReport:
    """number = tr(omega) / 2; trace = tr(omega)"""

    number: float
    trace: float
    energy: float

    def as_row(self, t: Optional[float] = None) -> Dict[str, float]:
        row = {"number": self.number, "trace": self.trace, "energy": self.energy}
        if t is not None:
            row = {"t": float(t), **row}
        return row


def particle_number(state: HFBState) -> float:
    """M = tr Gamma; a large imaginary part is reported as lost Hermiticity"""
    trace = kernel_trace(state.gamma)
    if abs(trace.imag) > HERMITICITY_TRACE_TOL:
        log_warning(f"tr Gamma has imaginary part {trace.imag:.3e}: Hermiticity lost at t={state.t:.6g}")
    return float(trace.real)


def energy(state: HFBState) -> ConservedReport:
    """
    Energy per particle, split as

        kinetic     = tr(grad.grad Gamma)
        pair        = 1/2 int v |Lambda|^2
        exchange    = 1/4 int v |Gamma|^2
        direct      = 1/4 int v Gamma(x1,x1) Gamma(x2,x2)
        condensate  = -1/2 int v |phi(x1)|^2 |phi(x2)|^2
        correlation = exchange + direct + condensate

    The first five are the leading-order energy. correlation vanishes on
    coherent states and is O(1/N) on pair-excitation data; with it the total
    is the quasi-free expectation of the Hamiltonian, which the full system,
    including the (v_N / N) Lambda multiplier, conserves exactly.
    """
    grid = state.grid
    ctx = potential_context(state.spec, grid)
    V = ctx.pair
    cell = grid.cell
    phi, lam, gamma = state.arrays()

    rho = np.diagonal(gamma).real.copy()
    density = np.abs(phi) ** 2
    trace = kernel_trace(state.gamma)

    kinetic = kinetic_trace(state.gamma).real
    pair = 0.5 * cell**2 * float(np.sum(V * np.abs(lam) ** 2))
    exchange = 0.25 * cell**2 * float(np.sum(V * np.abs(gamma) ** 2))
    direct = 0.25 * cell * float(np.sum(rho * convolve(ctx.vN.values, rho, grid).real))
    condensate = -0.5 * cell * float(np.sum(density * convolve(ctx.vN.values, density, grid).real))
    correlation = exchange + direct + condensate
    return ConservedReport(
        t=float(state.t),
        mass=float(trace.real),
        mass_imag=float(trace.imag),
        energy=kinetic + pair + exchange + direct + condensate + correlation,
        kinetic=kinetic,
        pair=pair,
        exchange=exchange,
        direct=direct,
        condensate=condensate,
        correlation=correlation,
    )


def fermi_conserved(omega: Kernel, psi: Kernel, v: Field) -> FermiReport:
    """
    Number and energy of the aligned-Fermion system:
    E = 1/2 tr(grad.grad omega) + 1/4 int v |psi|^2 + 1/4 int v (rho rho - |omega|^2)
    """
    grid = omega.grid
    cell = grid.cell
    V = pair_values(v)
    w, p = omega.values, psi.values
    rho = np.diagonal(w).real
    trace = kernel_trace(omega).real
    e = (
        0.5 * kinetic_trace(omega).real
        + 0.25 * cell**2 * float(np.sum(V * np.abs(p) ** 2))
        + 0.25 * cell**2 * float(np.sum(V * (np.outer(rho, rho) - np.abs(w) ** 2)))
    )
    return FermiReport(number=0.5 * trace, trace=trace, energy=float(e))
