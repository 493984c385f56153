from pathlib import Path

import pytest
import yaml
from typer.testing import CliRunner

from hfb_cli.core.commands.base import CommandFactory
from hfb_cli.core.errors import CommandError
from hfb_cli.main import app

runner = CliRunner()

SMALL_RUN = {
    "seed": 1,
    "grid": {"d": 1, "n": 16, "L": 6.283185307179586},
    "potential": {"beta": 0.8, "big_n": 4.0},
    "big_n_list": [2.0, 4.0],
    "initial": {"k_profile": "rank1", "k_strength": 0.1},
    "scheme": {"dt": 0.01, "T": 0.04},
    "output": {"progress": False},
}


@pytest.fixture
def small_config(tmp_path) -> Path:
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(SMALL_RUN))
    return path


def invoke(*args: str):
    return runner.invoke(app, ["--serial", *args])


def only_run_dir(base: Path) -> Path:
    dirs = [p for p in base.iterdir() if p.is_dir()]
    assert len(dirs) == 1
    return dirs[0]


class TestValidateConfig:
    def test_defaults(self):
        result = invoke("validate-config")
        assert result.exit_code == 0, result.output
        assert "alpha > 1/2" in result.output
        assert "config hash" in result.output

    def test_violation_exits_1(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text(yaml.safe_dump({"norms": {"alpha": 0.5}}))
        result = invoke("validate-config", "--config", str(path))
        assert result.exit_code == 1
        assert "FAILED" in result.output
        assert "alpha > 1/2" in result.output

    def test_missing_file_exits_1(self, tmp_path):
        result = invoke("validate-config", "-c", str(tmp_path / "absent.yaml"))
        assert result.exit_code == 1


class TestRuns:
    def test_simulate_then_norms_agree(self, small_config, tmp_path):
        out = tmp_path / "runs"
        result = invoke("simulate", "-c", str(small_config), "-o", str(out))
        assert result.exit_code == 0, result.output
        run_dir = only_run_dir(out)
        for name in ("config.json", "state_initial.hfbs", "state_final.hfbs", "trace.hfbt", "conserved.csv", "norms.csv", "norms.json"):
            assert (run_dir / name).exists(), name
        assert len((run_dir / "conserved.csv").read_text().splitlines()) == 6
        simulated = (run_dir / "norms.csv").read_bytes()

        result = invoke("norms", str(run_dir / "trace.hfbt"), "-c", str(small_config))
        assert result.exit_code == 0, result.output
        assert (run_dir / "norms.csv").read_bytes() == simulated

    def test_same_config_same_run_dir(self, small_config, tmp_path):
        out = tmp_path / "runs"
        for _ in range(2):
            assert invoke("simulate", "-c", str(small_config), "-o", str(out)).exit_code == 0
        only_run_dir(out)

    def test_unresolved_potential_exits_1(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text(yaml.safe_dump({**SMALL_RUN, "big_n_list": [2.0, 64.0]}))
        result = invoke("simulate", "-c", str(path), "-o", str(tmp_path / "runs"))
        assert result.exit_code == 1
        assert "N^beta <= pi*n/L" in result.output

    def test_norms_of_a_missing_trace(self, tmp_path):
        result = invoke("norms", str(tmp_path / "none.hfbt"))
        assert result.exit_code == 1

    def test_sweep(self, small_config, tmp_path):
        out = tmp_path / "runs"
        result = invoke("sweep", "-c", str(small_config), "-o", str(out))
        assert result.exit_code == 0, result.output
        run_dir = only_run_dir(out)
        # two N times three windows
        assert len((run_dir / "sweep.csv").read_text().splitlines()) == 7
        assert (run_dir / "sweep.json").exists()


class TestChecks:
    def test_oracle_subset(self, tmp_path):
        out = tmp_path / "runs"
        result = invoke("oracle", "--only", "conv_diag", "--only", "kernel_compose", "-o", str(out))
        assert result.exit_code == 0, result.output
        rows = (only_run_dir(out) / "oracle.csv").read_text().splitlines()
        assert rows[0] == "name,n,residual,tolerance,passed"
        assert len(rows) == 5

    def test_verify_mlogm(self, tmp_path):
        out = tmp_path / "runs"
        result = invoke("verify", "mlogm", "-o", str(out))
        assert result.exit_code == 0, result.output
        run_dir = only_run_dir(out)
        assert (run_dir / "lemma_mlogm.csv").read_text().startswith("level,sample,ratio\n")
        assert (run_dir / "lemma_mlogm.json").exists()

    def test_verify_rejects_bad_exponent(self, tmp_path):
        result = invoke("verify", "duhamel", "--b", "1.5", "-e", "1", "-o", str(tmp_path / "runs"))
        assert result.exit_code == 1


class TestSurface:
    def test_unknown_command(self):
        assert invoke("frobnicate").exit_code == 2

    def test_version(self):
        result = invoke("version")
        assert result.exit_code == 0
        assert "HFB CLI version" in result.output

    def test_every_verb_has_a_command(self):
        commands = [CommandFactory.create(key) for key in CommandFactory.registered()]
        assert {c.name() for c in commands} == {"simulate", "norms", "sweep", "verify", "oracle", "validate-config"}
        assert all(c.description() for c in commands)

    def test_unregistered_command(self):
        with pytest.raises(CommandError):
            CommandFactory.create("frobnicate")
