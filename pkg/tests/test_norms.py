import math

import numpy as np
import pytest
from pydantic import ValidationError as PydanticValidationError

from hfb_cli.core.errors import ValidationError
from hfb_cli.core.physics.hfb_state import InitialDataRecipe, instantiate
from hfb_cli.core.physics.integrator import SchemeConfig, evolve
from hfb_cli.core.physics.lattice import Kernel, make_grid
from hfb_cli.core.physics.norms import (
    NormConfig,
    collapse_norm,
    composite_norms,
    dyadic_index,
    freq_projection,
    kernel_modal_coefficients,
    mixed_norm,
    mixed_norm_array,
    mode_frequencies,
    quarter_time_norm,
    smooth_cutoff,
    xsb_dual_estimate,
    xsb_norm,
)
from hfb_cli.core.physics.potentials import PotentialSpec

SPEC = PotentialSpec(beta=0.8, big_n=4.0)
RECIPE = InitialDataRecipe(k_profile="rank1", k_strength=0.2)


@pytest.fixture(scope="module")
def trace():
    grid = make_grid(1, 8, 2.0 * math.pi)
    state = instantiate(RECIPE, grid, SPEC)
    return evolve(state, SchemeConfig(dt=0.01, T=0.08, track_conserved=False))


class TestMixedNorms:
    def setup_method(self):
        self.grid = make_grid(1, 16, 2.0 * math.pi)
        self.times = np.arange(10) * 0.1

    def test_constant_field(self):
        ones = np.ones((10, self.grid.size))
        assert mixed_norm_array(ones, self.times, self.grid, 2.0, 2.0) == pytest.approx(math.sqrt(2.0 * math.pi))
        assert mixed_norm_array(ones, self.times, self.grid, math.inf, 2.0) == pytest.approx(math.sqrt(2.0 * math.pi))
        assert mixed_norm_array(ones, self.times, self.grid, math.inf, math.inf) == pytest.approx(1.0)

    def test_constant_kernel(self):
        ones = np.ones((10, self.grid.size, self.grid.size))
        assert mixed_norm_array(ones, self.times, self.grid, 2.0, 2.0) == pytest.approx(2.0 * math.pi)

    def test_window_selects_leading_samples(self):
        ones = np.ones((10, self.grid.size))
        # samples t = 0.0 .. 0.4
        assert mixed_norm_array(ones, self.times, self.grid, 2.0, 2.0, T=0.5) == pytest.approx(
            math.sqrt(0.5 * 2.0 * math.pi)
        )

    def test_window_outside_range_raises(self):
        with pytest.raises(ValidationError):
            mixed_norm_array(np.ones((10, self.grid.size)), self.times, self.grid, 2.0, 2.0, T=5.0)

    def test_unknown_order_raises(self):
        with pytest.raises(ValidationError):
            mixed_norm_array(np.ones((10, 16, 16)), self.times, self.grid, 2.0, 2.0, order="zx")

    def test_variable_orders_agree_for_symmetric_kernels(self, trace):
        xy = mixed_norm(trace, None, 2.0, 6.0, "lambda", order="xy")
        yx = mixed_norm(trace, None, 2.0, 6.0, "lambda", order="yx")
        assert xy == pytest.approx(yx, rel=1e-12)


class TestDiagonalNorms:
    def test_norms_grow_with_the_window(self, trace):
        assert collapse_norm(trace, 0.55, "lambda", T=0.04) <= collapse_norm(trace, 0.55, "lambda")
        assert mixed_norm(trace, None, 2.0, 2.0, "phi", T=0.04) <= mixed_norm(trace, None, 2.0, 2.0, "phi")

    def test_zero_trace_has_zero_norms(self, trace):
        zero = trace.scaled(0.0)
        assert collapse_norm(zero, 0.55, "gamma") == 0.0
        assert quarter_time_norm(zero, "lambda") == 0.0

    def test_symmetric_convention_uses_even_offsets(self, trace):
        assert collapse_norm(trace, 0.55, convention="symmetric") <= collapse_norm(trace, 0.55, convention="shift")
        with pytest.raises(ValidationError):
            collapse_norm(trace, 0.55, convention="diagonal")

    def test_partial_offsets_warn(self, warnings_seen):
        grid = make_grid(1, 8, 2.0 * math.pi)
        state = instantiate(RECIPE, grid, SPEC)
        partial = evolve(state, SchemeConfig(dt=0.01, T=0.03, offsets=((0,), (2,)), track_conserved=False))
        collapse_norm(partial, 0.55)
        assert any("under-approximation" in m for m in warnings_seen.messages)


class TestXsb:
    def test_b_zero_is_the_l2_norm(self, trace):
        assert xsb_norm(trace, 0.0) == pytest.approx(mixed_norm(trace, None, 2.0, 2.0, "lambda"), rel=1e-10)

    def test_monotone_in_b(self, trace):
        assert xsb_norm(trace, 0.3) <= xsb_norm(trace, 0.48)

    def test_strided_snapshots_rejected(self):
        grid = make_grid(1, 8, 2.0 * math.pi)
        state = instantiate(RECIPE, grid, SPEC)
        strided = evolve(state, SchemeConfig(dt=0.01, T=0.04, store_every=2, track_conserved=False))
        with pytest.raises(ValidationError):
            xsb_norm(strided, 0.48)

    def test_mode_frequencies(self):
        grid = make_grid(1, 4, 2.0 * math.pi)
        k2 = grid.k_squared.reshape(-1)
        plus = mode_frequencies(grid, "plus_plus").reshape(4, 4)
        minus = mode_frequencies(grid, "plus_minus").reshape(4, 4)
        assert plus[1, 2] == pytest.approx(k2[1] + k2[2])
        assert minus[1, 2] == pytest.approx(k2[1] - k2[2])
        with pytest.raises(ValidationError):
            mode_frequencies(grid, "minus_minus")

    def test_dual_estimate_is_bounded_by_direct(self, trace):
        coeffs = kernel_modal_coefficients(trace.lambda_snaps, trace.grid)
        omega = mode_frequencies(trace.grid, "plus_plus")
        duals = []
        for samples in (4, 32, 256):
            direct, dual = xsb_dual_estimate(coeffs, trace.times, omega, 0.48, samples=samples)
            assert 0.0 < dual <= direct * (1.0 + 1e-12)
            duals.append(dual)
        assert duals[0] <= duals[1] * (1.0 + 1e-12)
        assert duals[1] <= duals[2] * (1.0 + 1e-12)

    def test_dual_estimate_reaches_direct_on_full_span(self, rng):
        times = np.arange(8) * 0.05
        coeffs = rng.standard_normal((8, 6)) + 1j * rng.standard_normal((8, 6))
        omega = np.arange(6.0)
        direct, partial = xsb_dual_estimate(coeffs, times, omega, 0.4, samples=10)
        assert partial < 0.9 * direct
        _, full = xsb_dual_estimate(coeffs, times, omega, 0.4, samples=10_000)
        assert full == pytest.approx(direct, rel=1e-10)


class TestProjections:
    def test_smooth_cutoff_profile(self):
        values = smooth_cutoff(np.array([0.0, 1.0, 1.5, 2.0, 3.0]))
        assert values[0] == 1.0 and values[1] == 1.0
        assert values[2] == pytest.approx(0.5)
        assert values[3] == 0.0 and values[4] == 0.0
        ramp = smooth_cutoff(np.linspace(1.0, 2.0, 50))
        assert np.all(np.diff(ramp) <= 0.0)

    @pytest.mark.parametrize("M,index", [(2.0, 0), (4.0, 1), (5.0, 2), (8.0, 2)])
    def test_dyadic_index(self, M, index):
        assert dyadic_index(M) == index

    def test_dyadic_index_rejects_small_cutoffs(self):
        with pytest.raises(ValidationError):
            dyadic_index(0.5)

    def test_low_plus_high_is_identity(self, rng):
        grid = make_grid(1, 16, 2.0 * math.pi)
        values = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        K = Kernel(grid, values)
        for mode in ("xi_minus_eta", "xi_plus_eta"):
            low = freq_projection(K, mode, 4.0, "low")
            high = freq_projection(K, mode, 4.0, "high")
            assert np.max(np.abs((low + high).values - values)) <= 1e-12

    def test_raw_arrays_need_a_grid(self):
        with pytest.raises(ValidationError):
            freq_projection(np.zeros((2, 8, 8)), "xi_minus_eta", 4.0)


class TestCompositeNorms:
    def test_report_layout(self, trace):
        report = composite_norms(trace, NormConfig(), SPEC)
        row = report.as_row()
        assert list(row)[:5] == ["T", "nt_lambda", "nt_gamma_dot", "nt_phi", "script_n"]
        assert row["T"] == pytest.approx(0.09)
        assert "lambda_LinfL2L2_xy" in row
        assert report.script_n is not None and report.script_n > 0.0
        lam = [v for k, v in report.terms.items() if k.startswith("lambda_")]
        assert report.nt_lambda == pytest.approx(sum(lam))

    def test_norms_are_homogeneous(self, trace):
        base = composite_norms(trace, NormConfig(), SPEC)
        doubled = composite_norms(trace.scaled(2.0), NormConfig(), SPEC)
        for key, value in base.terms.items():
            assert doubled.terms[key] == pytest.approx(2.0 * value, rel=1e-10, abs=1e-300)

    def test_no_script_norm_without_potential(self, trace):
        assert composite_norms(trace, NormConfig()).script_n is None


class TestNormConfig:
    def test_infinite_exponents_round_trip(self):
        cfg = NormConfig(pq_pairs=[["inf", 2], [2, 6]])
        assert math.isinf(cfg.pq_pairs[0][0])
        assert cfg.model_dump(mode="json")["pq_pairs"][0] == ["inf", 2.0]

    def test_exponents_below_one_rejected(self):
        with pytest.raises(PydanticValidationError):
            NormConfig(pq_pairs=[[0.5, 2]])

    def test_beta_prime_defaults_to_midpoint(self):
        assert NormConfig().beta_prime_for(0.8) == pytest.approx(0.9)
        assert NormConfig(beta_prime=0.95).beta_prime_for(0.8) == 0.95
