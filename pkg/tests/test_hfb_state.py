import math

import numpy as np
import pytest

from hfb_cli.core.errors import GridError, SeriesError, ValidationError
from hfb_cli.core.physics.hfb_state import (
    InitialDataRecipe,
    build_k,
    build_phi,
    closure_identity_residual,
    coherent_state,
    from_pair_excitation,
    instantiate,
    kinetic_decomposition,
    pair_closure_residual,
    pair_gradient_inequality,
    psd_margin,
    required_depth,
    sh_ch_series,
    validate,
)
from hfb_cli.core.physics.lattice import Field, Kernel, make_grid
from hfb_cli.core.physics.potentials import PotentialSpec


def unit_gaussian(grid):
    x = grid.flat_coordinates()[:, 0]
    e = np.exp(-((x - 0.5 * grid.L) ** 2))
    return e / math.sqrt(float(np.sum(e**2)) * grid.cell)


class TestSeries:
    def setup_method(self):
        self.grid = make_grid(1, 16, 2.0 * math.pi)

    def test_rank_one_closed_form(self):
        e = unit_gaussian(self.grid)
        ee = np.outer(e, e)
        u, c = sh_ch_series(Kernel(self.grid, 0.7 * ee, "symmetric"), depth=10)
        np.testing.assert_allclose(u.values, math.sinh(0.7) * ee, atol=1e-12)
        np.testing.assert_allclose(c.dense.values, (math.cosh(0.7) - 1.0) * ee, atol=1e-12)
        assert c.scalar == 1.0

    def test_closure_identity(self, rng):
        raw = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        k = Kernel(self.grid, raw + raw.T, "symmetric")
        k = k * (0.8 / k.hs_norm())
        u, c = sh_ch_series(k, depth=12)
        assert closure_identity_residual(u, c) <= 1e-10

    def test_divergence_guard(self):
        e = unit_gaussian(self.grid)
        with pytest.raises(SeriesError):
            sh_ch_series(Kernel(self.grid, 11.0 * np.outer(e, e), "symmetric"))

    def test_shallow_depth_names_required_depth(self):
        e = unit_gaussian(self.grid)
        with pytest.raises(SeriesError) as info:
            sh_ch_series(Kernel(self.grid, np.outer(e, e), "symmetric"), depth=1)
        assert info.value.required_depth == required_depth(1.0)
        assert "depth" in info.value.help_text

    def test_depth_must_be_positive(self):
        with pytest.raises(ValidationError):
            sh_ch_series(Kernel.zeros(self.grid, "symmetric"), depth=0)


class TestStates:
    def setup_method(self):
        self.grid = make_grid(1, 16, 2.0 * math.pi)
        self.spec = PotentialSpec(beta=0.8, big_n=4.0)
        self.phi = build_phi(InitialDataRecipe(), self.grid)

    def test_phi_is_normalized(self):
        assert self.phi.l2_norm() == pytest.approx(1.0)

    def test_coherent_state(self):
        state = coherent_state(self.phi, self.spec)
        np.testing.assert_allclose(state.gamma.values, np.outer(self.phi.values.conj(), self.phi.values), atol=1e-14)
        np.testing.assert_allclose(state.lam.values, np.outer(self.phi.values, self.phi.values), atol=1e-14)
        assert abs(psd_margin(state)) < 1e-12

    def test_pair_excitation_is_valid(self):
        recipe = InitialDataRecipe(k_profile="rank1", k_strength=0.5)
        state = instantiate(recipe, self.grid, self.spec)
        report = validate(state)
        assert report.ok, report.violations
        assert psd_margin(state) >= -1e-9

    def test_validate_flags_broken_hermiticity(self, rng):
        state = coherent_state(self.phi, self.spec)
        gamma = state.gamma.values + 1e-3 * rng.standard_normal((16, 16))
        broken = state.with_arrays(state.phi.values, state.lam.values, gamma)
        report = validate(broken)
        assert not report.ok
        assert "gamma_hermitian" in [check.name for check in report.violations]

    def test_pair_excitation_satisfies_closure(self):
        recipe = InitialDataRecipe(k_profile="gaussian", k_strength=0.4)
        state = instantiate(recipe, self.grid, self.spec)
        assert pair_closure_residual(state) <= 1e-12
        assert validate(state).residual("pair_closure") <= 1e-12

    def test_validate_flags_broken_closure(self):
        state = instantiate(InitialDataRecipe(k_profile="rank1", k_strength=0.5), self.grid, self.spec)
        phi, lam, gamma = state.arrays()
        doubled = 2.0 * gamma - np.outer(phi.conj(), phi)
        report = validate(state.with_arrays(phi, lam, doubled))
        assert [check.name for check in report.violations] == ["pair_closure"]

    def test_kinetic_decomposition(self):
        k = build_k(InitialDataRecipe(k_profile="gaussian", k_strength=0.4), self.grid)
        lhs, rhs = kinetic_decomposition(self.phi, k, self.spec)
        assert lhs == pytest.approx(rhs, rel=1e-9)

    def test_pair_gradient_inequality(self):
        k = build_k(InitialDataRecipe(k_profile="rank1", k_strength=0.6), self.grid)
        lhs, rhs = pair_gradient_inequality(k)
        assert 0.0 < lhs <= rhs

    def test_random_k_is_seeded_and_symmetric(self):
        recipe = InitialDataRecipe(k_profile="random", k_strength=0.3)
        a = build_k(recipe, self.grid, np.random.default_rng(5))
        b = build_k(recipe, self.grid, np.random.default_rng(5))
        np.testing.assert_array_equal(a.values, b.values)
        assert a.symmetry_residual("symmetric") == 0.0
        assert a.hs_norm() == pytest.approx(0.3)

    def test_same_data_across_n(self):
        recipe = InitialDataRecipe(k_profile="random", k_strength=0.2)
        low = instantiate(recipe, self.grid, self.spec.with_big_n(2.0), seed=3)
        high = instantiate(recipe, self.grid, self.spec.with_big_n(4.0), seed=3)
        np.testing.assert_array_equal(low.phi.values, high.phi.values)
        fluct_low = low.gamma.values - np.outer(low.phi.values.conj(), low.phi.values)
        fluct_high = high.gamma.values - np.outer(high.phi.values.conj(), high.phi.values)
        np.testing.assert_allclose(2.0 * fluct_low, 4.0 * fluct_high, atol=1e-13)

    def test_plane_wave_modes_must_match_weights(self):
        recipe = InitialDataRecipe(phi_profile="plane_waves", plane_wave_modes=((1,),), plane_wave_weights=(1.0, 2.0))
        with pytest.raises(ValidationError):
            build_phi(recipe, self.grid)


def test_from_pair_excitation_rejects_other_grid():
    grid = make_grid(1, 16, 1.0)
    other = make_grid(1, 8, 1.0)
    with pytest.raises(GridError):
        from_pair_excitation(Field.zeros(grid), Kernel.zeros(other, "symmetric"), PotentialSpec())
