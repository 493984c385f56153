"""
Independent re-computations of the numerical kernels, collected into a
pass/fail ledger.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from hfb_cli.core.errors import HfbError, log_warning
from hfb_cli.core.physics.hfb_state import (
    HFBState,
    InitialDataRecipe,
    closure_identity_residual,
    coherent_state,
    instantiate,
    sh_ch_series,
)
from hfb_cli.core.physics.integrator import SchemeConfig, bcs_pair_state, evolve, evolve_fermi
from hfb_cli.core.physics.lattice import Field, Grid, Kernel, kernel_compose, make_grid
from hfb_cli.core.physics.potentials import PotentialSpec, potential_context
from hfb_cli.core.physics.rhs import RhsAssembler, RhsOutput, conv_diag, fermi_constraint_residual, rhs_bracket, rhs_direct
from hfb_cli.core.runtime import Runtime

DEFAULT_SIZES = (8, 16)
ORACLE_BOX = 2.0 * math.pi
ORACLE_SPEC = PotentialSpec(beta=0.8, big_n=4.0)


@dataclass(frozen=True)
class OracleEntry:
    name: str
    n: int
    residual: float
    tolerance: float
    message: str = ""

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual)) and self.residual <= self.tolerance

    def as_row(self) -> Dict[str, object]:
        return {
            "name": self.name,
            "n": self.n,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


@dataclass
class OracleLedger:
    entries: List[OracleEntry] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    @property
    def failed(self) -> List[OracleEntry]:
        return [e for e in self.entries if not e.passed]

    def pass_set(self, n: Optional[int] = None) -> set:
        return {e.name for e in self.entries if e.passed and (n is None or e.n == n)}

    def rows(self) -> List[Dict[str, object]]:
        return [e.as_row() for e in self.entries]


def relative_residual(value: np.ndarray, reference: np.ndarray) -> float:
    scale = float(np.linalg.norm(reference))
    return float(np.linalg.norm(value - reference) / (scale if scale > 0 else 1.0))


def random_state(grid: Grid, spec: PotentialSpec, rng: np.random.Generator, scale: float = 0.3) -> HFBState:
    """Arbitrary symmetric Lambda and Hermitian Gamma; not a physical state"""

    def noise(shape: Tuple[int, ...]) -> np.ndarray:
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    size = grid.size
    lam = noise((size, size))
    gamma = noise((size, size))
    state = HFBState.zeros(grid, spec)
    return state.with_arrays(
        scale * noise((size,)),
        scale * 0.5 * (lam + lam.T),
        scale * 0.5 * (gamma + gamma.conj().T),
    )


def rhs_by_loops(state: HFBState, vN: Field) -> RhsOutput:
    """Right-hand sides summed point by point from their integral formulas"""
    grid = state.grid
    size = grid.size
    cell = grid.cell
    diff = grid.difference_index
    v = vN.values
    phi, lam, gamma = state.arrays()
    g_bar = gamma.conj()

    def pot(x: int, z: int) -> complex:
        return v[diff[x, z]]

    v1 = np.array([cell * sum(pot(x, z) * gamma[z, z] for z in range(size)) for x in range(size)])
    w = np.array([cell * sum(pot(x, z) * abs(phi[z]) ** 2 for z in range(size)) for x in range(size)])

    dphi = np.zeros(size, dtype=complex)
    for x in range(size):
        exchange = cell * sum(pot(x, y) * gamma[y, x] * phi[y] for y in range(size)) - w[x] * phi[x]
        pairing = cell * sum(pot(x, y) * lam[x, y] * phi[y].conjugate() for y in range(size)) - w[x] * phi[x]
        dphi[x] = -v1[x] * phi[x] - exchange - pairing

    dlam = np.zeros((size, size), dtype=complex)
    dgb = np.zeros((size, size), dtype=complex)
    for x in range(size):
        for y in range(size):
            lam_sum = 0.0j
            gb_sum = 0.0j
            for z in range(size):
                vxz, vzy = pot(x, z), pot(z, y)
                lam_sum += vxz * lam[x, z] * gamma[z, y] + lam[x, z] * vzy * gamma[z, y]
                lam_sum += vxz * g_bar[x, z] * lam[z, y] + g_bar[x, z] * vzy * lam[z, y]
                gb_sum += vxz * lam[x, z] * lam[z, y].conjugate() - lam[x, z] * vzy * lam[z, y].conjugate()
                gb_sum += vxz * g_bar[x, z] * g_bar[z, y] - g_bar[x, z] * vzy * g_bar[z, y]
            dlam[x, y] = (
                -(v1[x] + v1[y]) * lam[x, y] - cell * lam_sum + 2.0 * (w[x] + w[y]) * phi[x] * phi[y]
            )
            dgb[x, y] = (
                -cell * gb_sum
                - (v1[x].conjugate() - v1[y].conjugate()) * g_bar[x, y]
                + 2.0 * (w[x] - w[y]) * phi[x] * phi[y].conjugate()
            )
    return RhsOutput.from_arrays(grid, (dphi, dlam, dgb))


def _rhs_residual(a: RhsOutput, b: RhsOutput) -> float:
    return max(relative_residual(x, y) for x, y in zip(a.arrays(), b.arrays()))


def _states(n: int, seed: int, samples: int) -> Tuple[Grid, List[HFBState], Field]:
    grid = make_grid(1, n, ORACLE_BOX)
    rng = np.random.default_rng([seed, n])
    states = [random_state(grid, ORACLE_SPEC, rng) for _ in range(samples)]
    return grid, states, potential_context(ORACLE_SPEC, grid).vN


def oracle_rhs_loops(n: int, seed: int, samples: int = 2) -> float:
    _, states, vN = _states(n, seed, samples)
    return max(_rhs_residual(rhs_direct(s, vN), rhs_by_loops(s, vN)) for s in states)


def oracle_bracket(n: int, seed: int, samples: int = 5, assembler: RhsAssembler = rhs_bracket) -> float:
    _, states, vN = _states(n, seed, samples)
    return max(_rhs_residual(assembler(s, vN), rhs_direct(s, vN)) for s in states)


def oracle_rank1_series(n: int, strength: float = 0.7) -> float:
    """sh(k), ch(k) for k = s e e^T against sinh(s) e e^T and delta + (cosh(s) - 1) e e^T"""
    grid = make_grid(1, n, ORACLE_BOX)
    x = grid.flat_coordinates()[:, 0]
    e = np.exp(-((x - 0.5 * grid.L) ** 2))
    e = e / math.sqrt(float(np.sum(e**2)) * grid.cell)
    ee = np.outer(e, e).astype(complex)
    u, c = sh_ch_series(Kernel(grid, strength * ee, "symmetric"), depth=20)
    sh_exact = math.sinh(strength) * ee
    ch_exact = (math.cosh(strength) - 1.0) * ee
    return max(
        relative_residual(u.values, sh_exact),
        relative_residual(c.dense.values, ch_exact) if c.scalar == 1.0 else math.inf,
    )


def oracle_closure(n: int, seed: int) -> float:
    grid = make_grid(1, n, ORACLE_BOX)
    rng = np.random.default_rng([seed, n, 7])
    raw = rng.standard_normal((grid.size, grid.size)) + 1j * rng.standard_normal((grid.size, grid.size))
    k = Kernel(grid, 0.5 * (raw + raw.T), "symmetric")
    k = k * (0.5 / k.hs_norm())
    u, c = sh_ch_series(k, depth=20)
    return closure_identity_residual(u, c)


def oracle_compose(n: int, seed: int) -> float:
    grid = make_grid(1, n, ORACLE_BOX)
    rng = np.random.default_rng([seed, n, 11])
    A = rng.standard_normal((grid.size, grid.size)) + 1j * rng.standard_normal((grid.size, grid.size))
    B = rng.standard_normal((grid.size, grid.size)) + 1j * rng.standard_normal((grid.size, grid.size))
    composed = kernel_compose(Kernel(grid, A), Kernel(grid, B)).values
    looped = np.array(
        [[grid.cell * sum(A[x, z] * B[z, y] for z in range(grid.size)) for y in range(grid.size)] for x in range(grid.size)]
    )
    return relative_residual(composed, looped)


def oracle_conv_diag(n: int, seed: int) -> float:
    grid, states, vN = _states(n, seed, 1)
    gamma = states[0].gamma.values
    fast = conv_diag(vN, states[0].gamma).values
    diff = grid.difference_index
    looped = np.array(
        [grid.cell * sum(vN.values[diff[x, z]] * gamma[z, z] for z in range(grid.size)) for x in range(grid.size)]
    )
    return relative_residual(fast, looped)


def oracle_cross_scheme(n: int, T: float = 0.02, dt: float = 1e-3) -> float:
    grid = make_grid(1, n, ORACLE_BOX)
    recipe = InitialDataRecipe(k_profile="rank1", k_strength=0.1)
    state = instantiate(recipe, grid, ORACLE_SPEC)
    finals = []
    for scheme in ("strang", "rk4"):
        cfg = SchemeConfig(scheme=scheme, dt=dt, T=T, offsets=((0,),), track_conserved=False)
        finals.append(evolve(state, cfg).final_state)
    a, b = finals
    return max(relative_residual(x, y) for x, y in zip(a.arrays(), b.arrays()))


def periodic_free_gaussian(grid: Grid, width: float, t: float, center: Optional[float] = None) -> np.ndarray:
    """
    Closed-form free evolution (exp(-i |xi|^2 t)) of the 1-d periodized Gaussian
    sum_m exp(-(x - x0 + mL)^2 / (2 width^2)); the image sum stops once its
    terms fall below 1e-18.
    """
    x0 = 0.5 * grid.L if center is None else center
    x = grid.flat_coordinates()[:, 0]
    a = 2.0 * width**2
    spread = a + 4j * t
    total = np.exp(-((x - x0) ** 2) / spread)
    m = 1
    while True:
        terms = [np.exp(-((x - x0 + s * grid.L) ** 2) / spread) for s in (m, -m)]
        total = total + terms[0] + terms[1]
        if max(float(np.max(np.abs(term))) for term in terms) < 1e-18:
            break
        m += 1
    return total / np.sqrt(1.0 + 4j * t / a)


def oracle_free_gaussian(n: int, T: float = 0.1, dt: float = 1e-2, width: float = 2.0) -> float:
    """Linear-only evolution of a periodized Gaussian against its closed form"""
    grid = make_grid(1, n, ORACLE_BOX)
    state = coherent_state(Field(grid, periodic_free_gaussian(grid, width, 0.0)), ORACLE_SPEC)
    cfg = SchemeConfig(dt=dt, T=T, nonlinear=False, offsets=((0,),), track_conserved=False)
    final = evolve(state, cfg).final_state
    return relative_residual(final.phi.values, periodic_free_gaussian(grid, width, T))


def oracle_free_plane_waves(n: int, T: float = 0.1, dt: float = 1e-2) -> float:
    """Linear-only evolution of a plane-wave superposition against exp(-i |xi|^2 t)"""
    grid = make_grid(1, n, ORACLE_BOX)
    recipe = InitialDataRecipe(phi_profile="plane_waves", plane_wave_modes=((0,), (1,), (-2,)), plane_wave_weights=(1.0, 0.5, 0.25))
    state = instantiate(recipe, grid, ORACLE_SPEC)
    cfg = SchemeConfig(dt=dt, T=T, nonlinear=False, offsets=((0,),), track_conserved=False)
    final = evolve(state, cfg).final_state
    exact = np.fft.ifft(np.exp(-1j * grid.k_squared.reshape(-1) * T) * np.fft.fft(state.phi.values))
    return relative_residual(final.phi.values, exact)


def oracle_fermi(n: int, T: float = 0.1, dt: float = 1e-3) -> float:
    """Constraint residual and number drift of a paired Fermion state, relative to their bounds"""
    grid = make_grid(1, n, ORACLE_BOX)
    vN = potential_context(ORACLE_SPEC, grid).vN
    state = bcs_pair_state(grid, vN, [(1,), (2,)], [0.4, 0.9])
    final, rows = evolve_fermi(state, dt, T)
    constraint = max(fermi_constraint_residual(final.omega, final.psi))
    drift = max(abs(row["number"] - rows[0]["number"]) for row in rows)
    return max(constraint / 1e-6, drift / 1e-7)


OracleFn = Callable[[int], float]


def oracle_table(seed: int, assembler: RhsAssembler) -> List[Tuple[str, OracleFn, float]]:
    """(name, oracle at size n, tolerance)"""
    return [
        ("rhs_loops", lambda n: oracle_rhs_loops(n, seed), 1e-11),
        ("bracket_vs_direct", lambda n: oracle_bracket(n, seed, assembler=assembler), 1e-11),
        ("rank1_series", lambda n: oracle_rank1_series(n), 1e-10),
        ("closure_identity", lambda n: oracle_closure(n, seed), 1e-10),
        ("kernel_compose", lambda n: oracle_compose(n, seed), 1e-12),
        ("conv_diag", lambda n: oracle_conv_diag(n, seed), 1e-12),
        ("cross_scheme", lambda n: oracle_cross_scheme(n), 1e-5),
        ("free_gaussian", lambda n: oracle_free_gaussian(n), 1e-10),
        ("free_plane_waves", lambda n: oracle_free_plane_waves(n), 1e-10),
        ("fermi_constraint", lambda n: oracle_fermi(n), 1.0),
    ]


def oracle_suite(
    seed: int = 0,
    sizes: Sequence[int] = DEFAULT_SIZES,
    assembler: RhsAssembler = rhs_bracket,
    only: Optional[Sequence[str]] = None,
) -> OracleLedger:
    """
    Run every oracle at every size. The assembler under test is injectable so
    a deliberately broken one can be shown to fail.
    """
    table = [row for row in oracle_table(seed, assembler) if only is None or row[0] in only]
    keys = [(name, n) for n in sizes for name, _, _ in table]
    lookup = {name: (fn, tol) for name, fn, tol in table}

    def run(key: Tuple[str, int]) -> OracleEntry:
        name, n = key
        fn, tol = lookup[name]
        try:
            return OracleEntry(name, n, float(fn(n)), tol)
        except HfbError as exc:
            log_warning(f"oracle {name} (n={n}) raised: {exc.message}")
            return OracleEntry(name, n, math.inf, tol, exc.message)

    results = Runtime().map_keyed(run, keys)
    return OracleLedger([results[key] for key in keys])
