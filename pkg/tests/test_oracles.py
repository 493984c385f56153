import math

import numpy as np
import pytest

from hfb_cli.core.errors import ValidationError
from hfb_cli.core.experiments.oracles import (
    OracleEntry,
    OracleLedger,
    oracle_cross_scheme,
    oracle_fermi,
    oracle_free_gaussian,
    oracle_suite,
    periodic_free_gaussian,
    relative_residual,
)
from hfb_cli.core.physics.lattice import make_grid
from hfb_cli.core.physics.rhs import RhsOutput, rhs_bracket

FAST = ["rhs_loops", "bracket_vs_direct", "rank1_series", "closure_identity", "kernel_compose", "conv_diag", "free_gaussian", "free_plane_waves"]


def skewed_bracket(state, vN):
    """bracket assembler with a relative error of 1e-6 in every component"""
    good = rhs_bracket(state, vN)
    return RhsOutput.from_arrays(state.grid, tuple(a * (1.0 + 1e-6) for a in good.arrays()))


def broken_bracket(state, vN):
    raise ValidationError("assembler unavailable", field="assembler")


class TestOracleSuite:
    def test_fast_oracles_pass(self):
        ledger = oracle_suite(seed=0, sizes=(8,), only=FAST)
        assert ledger.passed, [e.as_row() for e in ledger.failed]
        assert ledger.pass_set(8) == set(FAST)
        assert len(ledger.rows()) == len(FAST)

    def test_oracles_pass_at_both_sizes(self):
        ledger = oracle_suite(seed=3, only=["bracket_vs_direct", "conv_diag"])
        assert [(e.name, e.n) for e in ledger.entries] == [
            ("bracket_vs_direct", 8),
            ("conv_diag", 8),
            ("bracket_vs_direct", 16),
            ("conv_diag", 16),
        ]
        assert ledger.passed

    def test_skewed_assembler_is_caught(self):
        ledger = oracle_suite(sizes=(8,), assembler=skewed_bracket, only=["bracket_vs_direct", "rhs_loops"])
        assert not ledger.passed
        assert [e.name for e in ledger.failed] == ["bracket_vs_direct"]
        assert ledger.failed[0].residual == pytest.approx(1e-6, rel=1e-3)

    def test_raising_oracle_is_recorded(self, warnings_seen):
        ledger = oracle_suite(sizes=(8,), assembler=broken_bracket, only=["bracket_vs_direct"])
        entry = ledger.entries[0]
        assert math.isinf(entry.residual)
        assert entry.message == "assembler unavailable"
        assert not entry.passed
        assert any("bracket_vs_direct" in m for m in warnings_seen.messages)

    @pytest.mark.slow
    def test_scheme_oracles(self):
        assert oracle_cross_scheme(8) <= 1e-5
        assert oracle_fermi(8) <= 1.0


class TestLedger:
    def test_non_finite_residuals_fail(self):
        assert not OracleEntry("x", 8, float("nan"), 1.0).passed
        assert OracleEntry("x", 8, 0.5, 1.0).passed

    def test_failed_entries(self):
        ledger = OracleLedger([OracleEntry("a", 8, 0.0, 1.0), OracleEntry("b", 8, 2.0, 1.0)])
        assert not ledger.passed
        assert [e.name for e in ledger.failed] == ["b"]
        assert ledger.rows()[1] == {"name": "b", "n": 8, "residual": 2.0, "tolerance": 1.0, "passed": False}

    def test_relative_residual(self):
        assert relative_residual(np.array([1.0, 1.0]), np.array([1.0, 0.0])) == pytest.approx(1.0)
        assert relative_residual(np.array([3.0]), np.zeros(1)) == pytest.approx(3.0)


class TestFreeGaussian:
    def test_closed_form_at_time_zero_is_the_periodized_profile(self):
        grid = make_grid(1, 16, 2.0 * math.pi)
        x = grid.flat_coordinates()[:, 0]
        images = sum(np.exp(-((x - math.pi + m * grid.L) ** 2) / 8.0) for m in range(-6, 7))
        np.testing.assert_allclose(periodic_free_gaussian(grid, 2.0, 0.0), images, rtol=1e-14, atol=1e-16)

    def test_closed_form_keeps_the_l2_norm(self):
        grid = make_grid(1, 32, 2.0 * math.pi)
        start = np.linalg.norm(periodic_free_gaussian(grid, 2.0, 0.0))
        assert np.linalg.norm(periodic_free_gaussian(grid, 2.0, 0.3)) == pytest.approx(start, rel=1e-12)

    def test_linear_flow_matches_closed_form(self):
        assert oracle_free_gaussian(16) <= 1e-10
        assert oracle_free_gaussian(8, T=0.2, dt=0.05) <= 1e-10

    def test_narrow_gaussian_is_not_resolved_on_a_coarse_grid(self):
        assert oracle_free_gaussian(8, width=0.3) > 1e-6
