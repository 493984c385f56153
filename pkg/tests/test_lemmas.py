import math

import numpy as np
import pytest

from hfb_cli.core.errors import ValidationError
from hfb_cli.core.experiments.lemmas import (
    LemmaCheck,
    VerifyOptions,
    admissible_q,
    check_sobolev_exponents,
    check_strichartz_exponents,
    check_weighted_parameters,
    duhamel_ratio,
    duhamel_single_mode_ratio,
    mlogm_integral,
    scalar_sobolev_ratio,
    sobolev_angle_ratio,
    verify_duhamel,
    verify_mlogm,
    verify_quartertime,
    verify_sobolev_angle,
    verify_strichartz,
)
from hfb_cli.core.experiments.modal import (
    ModalEnsemble,
    ModeSet,
    duhamel,
    free_solution,
    modal_lebesgue_norm,
    single_mode_source,
    spatial_coefficients,
    time_grid,
)

SMALL = VerifyOptions(ensemble=2, levels=(8, 10), time_factor=2, pad=8)


class TestModeSet:
    def test_counts_and_lookup(self):
        modes = ModeSet(3, 2.0 * math.pi, 1)
        assert modes.size == 27
        assert modes.pair_count == 729
        assert tuple(modes.integers[modes.index((1, 0, -1))]) == (1, 0, -1)
        assert np.array_equal(modes.negation[modes.negation], np.arange(27))

    def test_rejects_bad_modes(self):
        with pytest.raises(ValidationError):
            ModeSet(4, 1.0, 1)
        with pytest.raises(ValidationError):
            ModeSet(1, 2.0 * math.pi, 1).index((2,))
        with pytest.raises(ValidationError):
            ModeSet(1, 2.0 * math.pi, 5).sample_points(8)

    def test_pair_frequencies(self):
        modes = ModeSet(1, 2.0 * math.pi, 1)
        plus = modes.pair_frequencies().reshape(3, 3)
        minus = modes.pair_frequencies("plus_minus").reshape(3, 3)
        assert plus[0, 1] == pytest.approx(1.0)
        assert minus[1, 2] == pytest.approx(-1.0)

    def test_time_grid(self):
        assert time_grid(1.0, 4).tolist() == [0.0, 0.25, 0.5, 0.75]
        assert time_grid(1.0, 4, extended=True).size == 8
        with pytest.raises(ValidationError):
            time_grid(1.0, 1)


class TestModalNorms:
    def setup_method(self):
        self.modes = ModeSet(3, 2.0 * math.pi, 1)

    def test_unit_coefficients_have_unit_l2_norm(self):
        coeffs = spatial_coefficients(self.modes, "random", np.random.default_rng(3))
        assert modal_lebesgue_norm(coeffs, self.modes, 8, 2.0) == pytest.approx(1.0, rel=1e-12)

    def test_single_pair_lebesgue_norm(self):
        coeffs = np.zeros(self.modes.pair_count, dtype=complex)
        coeffs[self.modes.index((1, 0, 0)) * self.modes.size + self.modes.index((0, 1, 0))] = 1.0
        L = 2.0 * math.pi
        assert modal_lebesgue_norm(coeffs, self.modes, 8, 4.0) == pytest.approx(L ** (3.0 / 4.0 - 1.5), rel=1e-12)

    @pytest.mark.parametrize("kind", ["diagonal", "tensor"])
    def test_structured_ensembles_are_normalized(self, kind):
        coeffs = spatial_coefficients(self.modes, kind, np.random.default_rng(5)).reshape(27, 27)
        assert np.linalg.norm(coeffs) == pytest.approx(1.0)
        nonzero = np.argwhere(np.abs(coeffs) > 0)
        if kind == "diagonal":
            assert all(self.modes.negation[i] == j for i, j in nonzero)
        else:
            assert set(nonzero[:, 1]) == {self.modes.index((0, 0, 0))}

    def test_ensemble_samples_do_not_depend_on_order(self):
        ensemble = ModalEnsemble(self.modes, seed=9)
        later = ensemble.sample(3).amplitudes
        ensemble.sample(0)
        assert np.array_equal(ensemble.sample(3).amplitudes, later)

    def test_unknown_kind(self):
        with pytest.raises(ValidationError):
            ModalEnsemble(self.modes, kind="gaussian")


class TestDuhamel:
    def test_matches_direct_sum(self, rng):
        nt, dt = 6, 0.1
        omega = np.array([0.0, 1.5, -2.0])
        source = rng.standard_normal((nt, 3)) + 1j * rng.standard_normal((nt, 3))
        out = duhamel(source, omega, dt)
        assert out.shape == (2 * nt, 3)
        for j in range(2 * nt):
            expected = sum(
                dt * np.exp(-1j * (j - k) * dt * omega) * source[k] for k in range(nt) if 0 <= j - k < nt
            )
            assert np.allclose(out[j], expected, atol=1e-13)

    def test_constant_source_gives_a_triangle(self):
        nt, dt = 5, 0.2
        out = duhamel(np.ones((nt, 1)), np.zeros(1), dt).real[:, 0]
        expected = [dt * (j + 1) if j < nt else dt * (2 * nt - 1 - j) for j in range(2 * nt)]
        assert out.tolist() == pytest.approx(expected)

    def test_free_solution_is_windowed(self):
        times = time_grid(1.0, 4, extended=True)
        values = free_solution(np.ones(2), np.array([0.0, 1.0]), times, T=1.0)
        assert np.all(values[4:] == 0.0)
        assert values[1, 1] == pytest.approx(np.exp(-0.25j))

    def test_single_mode_matches_closed_form(self):
        modes = ModeSet(1, 2.0 * math.pi, 1)
        source = single_mode_source(modes, (1,), (0,), 0.5)
        omega = modes.pair_frequencies()
        numeric = duhamel_ratio(source, omega, 0.45, 1.0, 256, pad=16)
        assert numeric == pytest.approx(duhamel_single_mode_ratio(0.45, 1.0, 0.5, 1.0), rel=0.05)

    def test_verify_duhamel_is_seeded(self):
        opts = VerifyOptions(d=1, ensemble=3, levels=(8, 12), pad=8)
        first = verify_duhamel(0.45, opts, seed=4)
        second = verify_duhamel(0.45, opts, seed=4)
        assert first.levels == [8, 12]
        assert all(len(v) == 3 for v in first.ratios.values())
        assert first.ratios == second.ratios
        assert first.max_ratio > 0.0

    def test_b_outside_unit_interval(self):
        with pytest.raises(ValidationError):
            verify_duhamel(1.2, SMALL)


class TestStrichartz:
    def test_admissible_q(self):
        assert admissible_q(0.4, 4.0) == pytest.approx(2.5)
        check_strichartz_exponents(0.4, 4.0, 2.5)
        with pytest.raises(ValidationError, match="admissible q"):
            check_strichartz_exponents(0.4, 4.0, 3.0)

    def test_needs_three_dimensions(self):
        with pytest.raises(ValidationError):
            verify_strichartz(0.4, 4.0, opts=VerifyOptions(d=1))

    def test_small_run(self):
        check = verify_strichartz(0.4, 4.0, None, SMALL, seed=1)
        assert check.parameters["q"] == pytest.approx(2.5)
        assert all(r > 0.0 for values in check.ratios.values() for r in values)


class TestQuarterTime:
    def test_plain_and_weighted_runs(self):
        plain = verify_quartertime(SMALL.model_copy(update={"levels": (8,)}), seed=2)
        weighted = verify_quartertime(SMALL.model_copy(update={"levels": (8,), "weighted": True}), seed=2)
        for check in (plain, weighted):
            assert all(math.isfinite(r) and r > 0.0 for r in check.ratios[8])
        assert weighted.parameters["weighted"] == 1.0

    def test_needs_data_or_source(self):
        with pytest.raises(ValidationError):
            verify_quartertime(SMALL, with_data=False, with_source=False)

    def test_weighted_parameter_ranges(self):
        check_weighted_parameters(VerifyOptions())
        with pytest.raises(ValidationError):
            check_weighted_parameters(VerifyOptions(epsilon=0.2))
        with pytest.raises(ValidationError):
            check_weighted_parameters(VerifyOptions(a=2.0))


class TestMLogM:
    @pytest.mark.parametrize("M", [2.0, 10.0, 50.0])
    def test_closed_forms(self, M):
        assert mlogm_integral(M, 0.0) == pytest.approx(4.0 * math.pi * (M - math.atan(M)), rel=1e-9)
        s = math.sqrt(2.0)
        assert mlogm_integral(M, 1.0) == pytest.approx(4.0 * math.pi * (M - s * math.atan(M / s)), rel=1e-9)

    def test_table(self):
        check = verify_mlogm((2.0, 4.0, 8.0), (-1.0, 0.0, 1.0))
        assert check.levels == [2.0, 4.0, 8.0]
        assert check.ensemble == 3
        assert all(r > 0.0 for values in check.ratios.values() for r in values)

    def test_rejects_small_or_unsorted_cutoffs(self):
        with pytest.raises(ValidationError):
            verify_mlogm((1.0, 4.0), (0.0,))
        with pytest.raises(ValidationError):
            verify_mlogm((4.0, 2.0), (0.0,))


class TestSobolevAngle:
    def test_exponent_relation(self):
        check_sobolev_exponents(2.0, 10.0 / 3.0, 0.6)
        with pytest.raises(ValidationError):
            check_sobolev_exponents(2.0, 6.0, 0.6)
        with pytest.raises(ValidationError):
            check_sobolev_exponents(4.0, 2.0, 0.6)

    def test_tensor_kernels_reduce_to_the_scalar_embedding(self):
        modes = ModeSet(3, 2.0 * math.pi, 1)
        coeffs = spatial_coefficients(modes, "tensor", np.random.default_rng(11))
        f = coeffs.reshape(modes.size, modes.size)[:, modes.index((0, 0, 0))]
        paired = sobolev_angle_ratio(coeffs, modes, 8, 2.0, 10.0 / 3.0, 0.6)
        scalar = scalar_sobolev_ratio(f, modes, 8, 2.0, 10.0 / 3.0, 0.6)
        assert paired == pytest.approx(scalar, rel=1e-10)

    def test_free_ensembles_rejected(self):
        with pytest.raises(ValidationError):
            verify_sobolev_angle(2.0, 10.0 / 3.0, 0.6, SMALL, kind="free")

    def test_small_run(self):
        check = verify_sobolev_angle(2.0, 10.0 / 3.0, 0.6, SMALL, seed=3)
        assert set(check.ratios) == {8, 10}
        assert all(r > 0.0 for values in check.ratios.values() for r in values)


class TestLemmaCheck:
    def test_statistics(self):
        check = LemmaCheck("demo", 2, {10.0: [1.0, 2.0], 20.0: [4.0, 3.0]})
        assert check.max_ratios == {10.0: 2.0, 20.0: 4.0}
        assert check.spread == pytest.approx(2.0)
        assert check.slope == pytest.approx(1.0)
        assert not check.trend_flat()
        assert len(check.rows()) == 4
        assert check.summary()["max_ratio"] == 4.0

    def test_non_finite_ratios_rejected(self):
        with pytest.raises(ValidationError):
            LemmaCheck("demo", 1, {8.0: [float("nan")]})
