"""
Nonlinear right-hand sides of the (phi, Lambda, Gamma) system.

Orientation used by every assembly here:

    d phi / dt        = i (Lap phi + R_phi)
    d Lambda / dt     = i (Lap_1 Lambda + Lap_2 Lambda - (v_N / N) Lambda + R_lambda)
    d conj(Gamma)/dt  = i (Lap_1 conj(Gamma) - Lap_2 conj(Gamma) + R_gamma_bar)

R_* below excludes the Laplacians and the (v_N / N) Lambda multiplier, which
the integrator handles as exact flows. Stored Gamma is updated through
d Gamma / dt = conj(d conj(Gamma) / dt).
"""
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from hfb_cli.core.errors import log_warning
from hfb_cli.core.physics.hfb_state import HFBState
from hfb_cli.core.physics.lattice import Field, Grid, Kernel, from_fourier, to_fourier
from hfb_cli.core.physics.potentials import PotentialContext, pair_values

Arrays = Tuple[np.ndarray, np.ndarray, np.ndarray]
FERMI_CONSTRAINT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class RhsOutput:
    """R_phi, R_lambda and R_gamma_bar in the orientation above"""

    dphi: Field
    dlambda: Kernel
    dgamma_bar: Kernel

    def arrays(self) -> Arrays:
        return self.dphi.values, self.dlambda.values, self.dgamma_bar.values

    @classmethod
    def from_arrays(cls, grid: Grid, arrays: Arrays) -> "RhsOutput":
        dphi, dlam, dgb = arrays
        return cls(Field(grid, dphi), Kernel(grid, dlam, "symmetric"), Kernel(grid, dgb, "none"))


def convolve(vN: np.ndarray, values: np.ndarray, grid: Grid) -> np.ndarray:
    """x -> integral of v(x - y) f(y) dy for one or a batch of fields"""
    spectrum = to_fourier(values, grid, 1) * to_fourier(vN, grid, 1)
    return from_fourier(spectrum, grid, 1) * grid.cell


def conv_diag(vN: Field, gamma: Kernel) -> Field:
    """x -> integral of v_N(x - y) Gamma(y, y) dy"""
    vN.grid.check_same(gamma.grid)
    return Field(vN.grid, convolve(vN.values, np.diagonal(gamma.values), vN.grid))


def _context(vN: Field, pair: Optional[np.ndarray]) -> PotentialContext:
    return PotentialContext(vN=vN, pair=pair if pair is not None else pair_values(vN))


def direct_arrays(phi: np.ndarray, lam: np.ndarray, gamma: np.ndarray, ctx: PotentialContext) -> Arrays:
    """Array-level direct assembly used by the integrator"""
    grid = ctx.vN.grid
    cell = grid.cell
    V = ctx.pair
    v = ctx.vN.values

    v1 = convolve(v, np.diagonal(gamma).copy(), grid)
    w = convolve(v, np.abs(phi) ** 2, grid)
    g_bar = gamma.conj()
    v_lam = V * lam
    v_gbar = V * g_bar

    exchange = (V * gamma.T) @ phi * cell - w * phi
    pairing = v_lam @ phi.conj() * cell - w * phi
    dphi = -v1 * phi - exchange - pairing

    comps = (v_lam @ gamma + lam @ (V * gamma) + v_gbar @ lam + g_bar @ v_lam) * cell
    phiphi = np.outer(phi, phi)
    dlam = -(v1[:, None] + v1[None, :]) * lam - comps + 2.0 * (w[:, None] + w[None, :]) * phiphi

    anomalous = (v_lam @ lam.conj() - lam @ (V * lam.conj())) * cell
    normal = (v_gbar @ g_bar - g_bar @ v_gbar) * cell
    v1_bar = v1.conj()
    dgb = (
        -anomalous
        - normal
        - (v1_bar[:, None] - v1_bar[None, :]) * g_bar
        + 2.0 * (w[:, None] - w[None, :]) * np.outer(phi, phi.conj())
    )
    return dphi, dlam, dgb


def rhs_direct(state: HFBState, vN: Field, pair: Optional[np.ndarray] = None) -> RhsOutput:
    """Every integral term assembled from convolutions and kernel compositions"""
    state.grid.check_same(vN.grid)
    return RhsOutput.from_arrays(state.grid, direct_arrays(*state.arrays(), _context(vN, pair)))


def bracket_comm(A: np.ndarray, B: np.ndarray, cell: float) -> np.ndarray:
    """[A, B] = A o B - B* o A*"""
    return (A @ B - B.conj().T @ A.conj().T) * cell


def bracket_sym(A: np.ndarray, B: np.ndarray, cell: float) -> np.ndarray:
    """{A, B} = A o B + B^T o A^T"""
    return (A @ B + B.T @ A.T) * cell


def _multiplication_kernel(values: np.ndarray, cell: float) -> np.ndarray:
    return np.diag(values) / cell


def bracket_arrays(phi: np.ndarray, lam: np.ndarray, gamma: np.ndarray, ctx: PotentialContext) -> Arrays:
    """Assembly through the commutator / symmetrization brackets"""
    grid = ctx.vN.grid
    cell = grid.cell
    V = ctx.pair
    v = ctx.vN.values
    g_bar = gamma.conj()
    phi_bar = phi.conj()

    d_gamma = _multiplication_kernel(convolve(v, np.diagonal(gamma).copy(), grid), cell)
    d_gamma_bar = _multiplication_kernel(convolve(v, np.diagonal(g_bar).copy(), grid), cell)

    phi_x_phi = np.outer(phi, phi)
    phib_x_phi = np.outer(phi_bar, phi)
    phi_x_phib = np.outer(phi, phi_bar)
    phib_x_phib = np.outer(phi_bar, phi_bar)

    dlam = (
        -bracket_sym(d_gamma_bar, lam, cell)
        - bracket_sym(V * g_bar, lam, cell)
        - bracket_sym(V * lam, gamma, cell)
        + bracket_sym(V * phi_x_phib, phi_x_phi, cell)
        + bracket_sym(V * phi_x_phi, phib_x_phi, cell)
    )

    b = (
        -bracket_comm(d_gamma, gamma, cell)
        - bracket_comm(V * lam.conj(), lam, cell)
        - bracket_comm(V * gamma, gamma, cell)
        + bracket_comm(V * phib_x_phib, phi_x_phi, cell)
        + bracket_comm(V * phib_x_phi, phib_x_phi, cell)
    )
    dgb = b.conj()

    hartree = np.diagonal(d_gamma) * cell
    weighted_phi = V * phi[None, :]
    exchange = np.diagonal(weighted_phi @ (gamma - phib_x_phi)) * cell
    ones = np.ones((1, grid.size))
    pairing = np.diagonal((V * (lam - phi_x_phi)) @ (phi_bar[:, None] @ ones)) * cell
    dphi = -hartree * phi - exchange - pairing
    return dphi, dlam, dgb


def rhs_bracket(state: HFBState, vN: Field, pair: Optional[np.ndarray] = None) -> RhsOutput:
    """Same contract as rhs_direct, assembled with bracket_comm / bracket_sym"""
    state.grid.check_same(vN.grid)
    return RhsOutput.from_arrays(state.grid, bracket_arrays(*state.arrays(), _context(vN, pair)))


RhsAssembler = Callable[[HFBState, Field], RhsOutput]


def rhs_local_delta(state: HFBState) -> RhsOutput:
    """Right-hand sides with v_N replaced by a unit delta interaction"""
    phi, lam, gamma = state.arrays()
    rho = np.diagonal(gamma).real.copy()
    ell = np.diagonal(lam).copy()
    g_bar = gamma.conj()
    density = np.abs(phi) ** 2

    dphi = -rho * phi - phi * (rho - density) - phi.conj() * (ell - phi**2)

    dlam = (
        -(rho[:, None] + rho[None, :]) * lam
        - (ell[:, None] * gamma + lam * rho[None, :] + rho[:, None] * lam + g_bar * ell[None, :])
        + 2.0 * (density[:, None] + density[None, :]) * np.outer(phi, phi)
    )

    dgb = (
        -(ell[:, None] * lam.conj() - lam * ell.conj()[None, :])
        - (rho[:, None] * g_bar - g_bar * rho[None, :])
        - (rho[:, None] - rho[None, :]) * g_bar
        + 2.0 * (density[:, None] - density[None, :]) * np.outer(phi, phi.conj())
    )
    return RhsOutput.from_arrays(state.grid, (dphi, dlam, dgb))


def fermi_constraint_residual(omega: Kernel, psi: Kernel) -> Tuple[float, float]:
    """
    Hilbert-Schmidt sizes of omega o omega - psi o conj(psi) - 2 omega
    and omega o psi - psi o conj(omega).
    """
    cell = omega.grid.cell
    w, p = omega.values, psi.values
    quadratic = (w @ w - p @ p.conj()) * cell - 2.0 * w
    commuting = (w @ p - p @ w.conj()) * cell
    return (
        float(np.sqrt(np.sum(np.abs(quadratic) ** 2)) * cell),
        float(np.sqrt(np.sum(np.abs(commuting) ** 2)) * cell),
    )


def fermi_arrays(omega: np.ndarray, psi: np.ndarray, vN: np.ndarray, V: np.ndarray, grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    """
    With k = (v * rho) delta - v omega and P = v psi,

        R_omega = k o omega - omega o k - P o conj(psi) + psi o conj(P)
        R_psi   = k o psi + psi o conj(k) - P o conj(omega) - omega o P + 2 P

    The pairing products are ordered so that the flow is the commutator
    flow of the generalized density: it keeps
    omega o omega - psi o conj(psi) = 2 omega and omega o psi = psi o conj(omega),
    and conserves tr omega and the energy of fermi_conserved.
    """
    cell = grid.cell
    density_potential = convolve(vN, np.diagonal(omega).copy(), grid)
    k_nl = _multiplication_kernel(density_potential, cell) - V * omega
    pairing = V * psi

    domega = (k_nl @ omega - omega @ k_nl - pairing @ psi.conj() + psi @ pairing.conj()) * cell
    dpsi = (k_nl @ psi + psi @ k_nl.conj() - pairing @ omega.conj() - omega @ pairing) * cell + 2.0 * pairing
    return domega, dpsi


def fermi_rhs(omega: Kernel, psi: Kernel, v: Field) -> Tuple[Kernel, Kernel]:
    """
    Nonlinear right-hand sides for the aligned-Fermion system

        (1/i) d omega / dt = (-Lap_1 + Lap_2) omega + R_omega
        (1/i) d psi / dt   = -(Lap_1 + Lap_2) psi + R_psi
    """
    grid = omega.grid
    grid.check_same(psi.grid)
    quadratic, commuting = fermi_constraint_residual(omega, psi)
    if max(quadratic, commuting) > FERMI_CONSTRAINT_TOL:
        log_warning(
            f"fermionic constraint residual {max(quadratic, commuting):.3e} exceeds {FERMI_CONSTRAINT_TOL:g}",
            help_text="omega o omega - psi o conj(psi) = 2 omega should hold for admissible data",
        )
    domega, dpsi = fermi_arrays(omega.values, psi.values, v.values, pair_values(v), grid)
    return Kernel(grid, domega, "hermitian"), Kernel(grid, dpsi, "antisymmetric")
