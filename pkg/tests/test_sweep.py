import math

import pytest

from hfb_cli.core.errors import NumericalBlowupError, UnresolvedRegimeError, ValidationError
from hfb_cli.core.experiments import sweep as sweep_module
from hfb_cli.core.experiments.sweep import SweepEntry, SweepOptions, SweepReport, check_big_ns, n_sweep
from hfb_cli.core.physics.hfb_state import InitialDataRecipe
from hfb_cli.core.physics.integrator import SchemeConfig
from hfb_cli.core.physics.lattice import make_grid
from hfb_cli.core.physics.norms import NormConfig, NormReport
from hfb_cli.core.physics.potentials import PotentialSpec

SPEC = PotentialSpec(beta=0.8, big_n=4.0)
RECIPE = InitialDataRecipe(k_profile="rank1", k_strength=0.1)
SCHEME = SchemeConfig(dt=0.01, T=0.04)


def _entry(big_n: float, value: float) -> SweepEntry:
    report = NormReport(T=1.0, nt_lambda=value, nt_gamma_dot=value, nt_phi=value)
    return SweepEntry(big_n=big_n, norms=[report])


class TestNSweep:
    def setup_method(self):
        self.grid = make_grid(1, 16, 2.0 * math.pi)

    def test_every_n_and_window_is_reported(self):
        done = []
        report = n_sweep(RECIPE, (2, 4, 8), SPEC, self.grid, SCHEME, NormConfig(), on_done=done.append)
        assert done == [2.0, 4.0, 8.0]
        assert len(report.succeeded) == 3
        assert report.windows == pytest.approx((0.01, 0.02, 0.04))
        rows = report.rows()
        assert len(rows) == 9
        assert list(rows[0])[:2] == ["big_n", "T"]
        summary = report.summary()
        assert summary["big_n"] == [2.0, 4.0, 8.0]
        assert summary["norms"]["nt_lambda"]["max_min_ratio"] >= 1.0
        assert summary["failed"] == {}

    def test_longer_windows_give_larger_norms(self):
        report = n_sweep(RECIPE, (4,), SPEC, self.grid, SCHEME, NormConfig(include_script_n=False))
        values = [r.nt_phi for r in report.entries[4.0].norms]
        assert values == sorted(values)

    def test_a_failing_n_does_not_stop_the_sweep(self, monkeypatch, warnings_seen):
        real_evolve = sweep_module.evolve

        def flaky(state, scheme):
            if state.big_n == 4.0:
                raise NumericalBlowupError("forced failure", last_good=state)
            return real_evolve(state, scheme)

        monkeypatch.setattr(sweep_module, "evolve", flaky)
        report = n_sweep(RECIPE, (2, 4, 8), SPEC, self.grid, SCHEME, NormConfig(include_script_n=False))
        assert report.failures == {4.0: "forced failure"}
        assert [e.big_n for e in report.succeeded] == [2.0, 8.0]
        assert report.summary()["failed"] == {"4.0": "forced failure"}
        assert any("N=4 failed" in m for m in warnings_seen.messages)

    def test_n_list_checks(self):
        with pytest.raises(ValidationError):
            check_big_ns([], SPEC, self.grid)
        with pytest.raises(ValidationError):
            check_big_ns([8.0, 4.0], SPEC, self.grid)
        with pytest.raises(UnresolvedRegimeError):
            check_big_ns([4.0, 64.0], SPEC, self.grid)


    def test_windows_must_hold_a_step(self):
        with pytest.raises(ValidationError):
            n_sweep(RECIPE, (4,), SPEC, self.grid, SCHEME, NormConfig(), SweepOptions(window_fractions=(0.1, 1.0)))


class TestSweepReport:
    def test_slope_and_ratio(self):
        entries = {n: _entry(n, n**0.5) for n in (4.0, 16.0)}
        report = SweepReport(entries=entries, windows=(1.0,))
        assert report.ratio("nt_lambda") == pytest.approx(2.0)
        assert report.slope("nt_lambda") == pytest.approx(0.5)
        assert report.ratio("script_n") is None

    def test_smallest_outlier_is_dropped(self, warnings_seen):
        report = SweepReport(entries={1.0: _entry(1.0, 100.0), 2.0: _entry(2.0, 1.0), 4.0: _entry(4.0, 1.2)}, windows=(1.0,))
        sweep_module._drop_outlier(report, SweepOptions().outlier_factor)
        assert report.dropped == [1.0]
        assert [e.big_n for e in report.succeeded] == [2.0, 4.0]
        assert any("outlier" in m for m in warnings_seen.messages)

    def test_consistent_values_are_kept(self):
        report = SweepReport(entries={n: _entry(n, 1.0 + n / 10) for n in (1.0, 2.0, 4.0)}, windows=(1.0,))
        sweep_module._drop_outlier(report, 10.0)
        assert report.dropped == []
