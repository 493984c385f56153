import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hfb_cli.core.errors import GridError, ValidationError
from hfb_cli.core.physics.lattice import (
    Field,
    Kernel,
    delta_kernel,
    fourier_multiplier,
    gradient_energy,
    japanese,
    kernel_compose,
    kernel_diag,
    kernel_trace,
    kinetic_trace,
    make_grid,
    outer,
    time_fourier,
    uniform_step,
)


class TestMakeGrid:
    @pytest.mark.parametrize("d, n, L", [(4, 16, 1.0), (1, 15, 1.0), (1, 6, 1.0), (1, 258, 1.0), (1, 16, 0.0), (2, 16, -1.0)])
    def test_rejects_out_of_range(self, d, n, L):
        with pytest.raises(GridError):
            make_grid(d, n, L)

    def test_derived_quantities(self):
        grid = make_grid(2, 8, 4.0)
        assert grid.dx == 0.5
        assert grid.size == 64
        assert grid.cell == 0.25
        assert grid.nyquist == pytest.approx(2.0 * math.pi)

    def test_power_of_two_not_required(self):
        assert make_grid(1, 24, 1.0).size == 24

    def test_difference_index_is_periodic(self):
        grid = make_grid(1, 8, 1.0)
        assert grid.difference_index[0, 1] == 7
        assert grid.difference_index[5, 2] == 3


class TestSpectralOperators:
    def setup_method(self):
        self.grid = make_grid(1, 16, 2.0 * math.pi)
        self.sine = Field.from_function(self.grid, lambda x: np.sin(x))

    def test_derivative_multiplier(self):
        derivative = fourier_multiplier(self.sine, lambda xi: 1j * xi[0])
        expected = np.cos(self.grid.flat_coordinates()[:, 0])
        np.testing.assert_allclose(derivative.values, expected, atol=1e-12)

    def test_gradient_energy_of_sine(self):
        assert gradient_energy(self.sine) == pytest.approx(math.pi, rel=1e-12)

    def test_kinetic_trace_matches_gradient_energy(self, rng):
        f = Field(self.grid, rng.standard_normal(16) + 1j * rng.standard_normal(16))
        g = outer(f.conj(), f)
        assert kinetic_trace(g).real == pytest.approx(gradient_energy(f), rel=1e-10)
        assert abs(kinetic_trace(g).imag) < 1e-10 * gradient_energy(f)

    def test_kernel_multiplier_acts_on_each_variable(self, rng):
        values = rng.standard_normal((16, 16))
        k = Kernel(self.grid, values)
        same = fourier_multiplier(k, lambda xi, eta: np.ones_like(xi[0] * eta[0]))
        np.testing.assert_allclose(same.values, values, atol=1e-12)


class TestKernelAlgebra:
    def test_delta_is_identity_for_composition(self, grid_1d, rng):
        k = Kernel(grid_1d, rng.standard_normal((16, 16)))
        np.testing.assert_allclose(kernel_compose(delta_kernel(grid_1d), k).values, k.values, atol=1e-12)
        np.testing.assert_allclose(kernel_compose(k, delta_kernel(grid_1d)).values, k.values, atol=1e-12)

    def test_trace_of_delta_counts_points(self, grid_2d):
        assert kernel_trace(delta_kernel(grid_2d)) == pytest.approx(grid_2d.size)

    def test_diag_reads_shifted_entries(self):
        grid = make_grid(1, 8, 1.0)
        k = Kernel(grid, np.arange(64, dtype=float).reshape(8, 8))
        np.testing.assert_array_equal(kernel_diag(k, (1,)).values.real, [1, 10, 19, 28, 37, 46, 55, 56])

    def test_grid_mismatch(self, grid_1d):
        other = make_grid(1, 8, 2.0 * math.pi)
        with pytest.raises(GridError):
            kernel_compose(Kernel.zeros(grid_1d), Kernel.zeros(other))

    def test_symmetry_residual(self, grid_1d, rng):
        a = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        assert Kernel(grid_1d, a + a.T).symmetry_residual("symmetric") == 0.0
        assert Kernel(grid_1d, a + a.conj().T).symmetry_residual("hermitian") == 0.0
        assert Kernel(grid_1d, a).symmetry_residual("symmetric") > 0.0


class TestTimeFourier:
    def test_zero_frequency_is_the_integral(self):
        times = 0.01 * np.arange(50)
        spectrum = time_fourier(times, np.ones(50))
        assert spectrum.values[0] == pytest.approx(0.5)
        assert spectrum.tau.size == 200
        assert spectrum.measure == pytest.approx(1.0 / (200 * 0.01))

    def test_window_keeps_half_open_interval(self):
        times = 0.01 * np.arange(50)
        spectrum = time_fourier(times, np.ones(50), T=0.2)
        assert spectrum.values[0] == pytest.approx(0.2)

    def test_padding_floor(self):
        with pytest.raises(ValidationError):
            time_fourier(np.arange(4.0), np.ones(4), pad=2)

    def test_non_uniform_samples(self):
        with pytest.raises(ValidationError):
            uniform_step(np.array([0.0, 0.1, 0.3]))


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=3))
@settings(max_examples=50, deadline=None)
def test_japanese_bracket(components):
    arrays = [np.array(c) for c in components]
    value = japanese(arrays)
    assert value >= 1.0
    assert japanese(arrays, 2.0) == pytest.approx(1.0 + sum(c * c for c in components))
