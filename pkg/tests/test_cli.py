"""
Tests for the eadlab command-line interface and its exit codes.

Run with: pytest -q tests/test_cli.py
"""

import json
from pathlib import Path

import pytest

from eadlab.cli import EXIT_ABORT, EXIT_INVALID, EXIT_OK, EXIT_USAGE, build_parser, main

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def linear_birth_path():
    return CONFIG_DIR / "linear_birth.json"


class TestParser:
    """Test argument parsing."""

    def test_no_command(self, capsys):
        assert main([]) == EXIT_USAGE

    def test_unknown_option(self, capsys):
        assert main(["validate", "--bogus"]) == EXIT_USAGE

    def test_bad_seed(self, capsys):
        assert main(["validate", "--seed", "-1"]) == EXIT_USAGE

    def test_subcommands(self):
        args = build_parser().parse_args(["integrate-lv", "--traits", "0.2,0.5", "--z0", "0.3,0.3"])
        assert args.traits == [0.2, 0.5]
        assert args.format == "csv"


class TestOracleCommand:
    """Test closed-form evaluation from the command line."""

    def test_hitting_prob(self, capsys):
        assert main(["oracle", "hitting-prob", "2", "1", "1", "2"]) == EXIT_OK
        assert capsys.readouterr().out.strip() == "0.6666666667"

    def test_invasion_limit_pair(self, capsys):
        """The limit command prints both the value and its error bound."""
        assert main(["oracle", "invasion-limit", "2", "1", "10"]) == EXIT_OK
        values = capsys.readouterr().out.split()
        assert len(values) == 2
        assert float(values[0]) == pytest.approx(0.5)
        assert float(values[1]) == pytest.approx(0.1)

    def test_wrong_argument_count(self, capsys):
        assert main(["oracle", "hitting-prob", "2", "1"]) == EXIT_USAGE
        assert "4 arguments" in capsys.readouterr().err

    def test_unknown_oracle(self, capsys):
        assert main(["oracle", "nonsense", "1"]) == EXIT_USAGE

    def test_outside_domain(self, capsys):
        """j > k is a validation failure, not a crash."""
        assert main(["oracle", "hitting-prob", "2", "1", "5", "2"]) == EXIT_INVALID

    def test_not_a_number(self, capsys):
        """A malformed argument is a usage error, not an oracle failure."""
        assert main(["oracle", "time-ratio-bound", "abc", "2"]) == EXIT_USAGE
        assert "eps must be a number" in capsys.readouterr().err

    def test_fractional_count(self, capsys):
        assert main(["oracle", "hitting-prob", "2", "1", "1.5", "2"]) == EXIT_USAGE
        assert "j must be an integer" in capsys.readouterr().err


class TestValidateCommand:
    """Test the model report."""

    def test_passes(self, linear_birth_path, capsys):
        assert main(["validate", "--config", str(linear_birth_path)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "Model passes" in out
        assert "r1 =" in out

    def test_json_output(self, linear_birth_path, capsys):
        assert main(["validate", "--config", str(linear_birth_path), "--format", "json"]) == EXIT_OK
        document = json.loads(capsys.readouterr().out)
        assert document["passed"] is True
        assert document["scaling"]["regime_consistent"] is False

    def test_missing_key(self, linear_birth_doc, write_config, capsys):
        del linear_birth_doc["rates"]["b"]
        assert main(["validate", "--config", str(write_config(linear_birth_doc))]) == EXIT_INVALID
        assert "/rates/b" in capsys.readouterr().err

    def test_failed_check(self, linear_birth_doc, write_config, capsys):
        linear_birth_doc["rates"]["d"] = "2"
        assert main(["validate", "--config", str(write_config(linear_birth_doc))]) == EXIT_INVALID
        assert "FAIL" in capsys.readouterr().out

    def test_needs_config(self, capsys):
        assert main(["validate"]) == EXIT_USAGE


class TestIntegrateCommands:
    """Test the deterministic integrators."""

    def test_integrate_cead(self, linear_birth_path, tmp_path, capsys):
        code = main(["integrate-cead", "--config", str(linear_birth_path), "--out", str(tmp_path),
                     "--horizon", "0.5", "--dt", "0.01"])
        assert code == EXIT_OK
        lines = (tmp_path / "cead.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "t,x"
        assert lines[-1].startswith("0.5,")
        assert "x(0.5)" in capsys.readouterr().out

    def test_integrate_cead_rejects_failing_model(self, linear_birth_doc, write_config, tmp_path, capsys):
        linear_birth_doc["rates"]["d"] = "2"
        code = main(["integrate-cead", "--config", str(write_config(linear_birth_doc)), "--out", str(tmp_path)])
        assert code == EXIT_INVALID

    def test_integrate_lv_coexistence(self, tmp_path, capsys):
        config = CONFIG_DIR / "linear_birth.json"
        code = main(["integrate-lv", "--config", str(config), "--out", str(tmp_path),
                     "--traits", "0.2,0.5", "--z0", "0.3,0.3", "--horizon", "1", "--dt", "0.01"])
        assert code == EXIT_OK
        assert (tmp_path / "lv.csv").exists()
        assert "equilibrium:" in capsys.readouterr().out

    def test_integrate_lv_length_mismatch(self, linear_birth_path, tmp_path, capsys):
        code = main(["integrate-lv", "--config", str(linear_birth_path), "--out", str(tmp_path),
                     "--traits", "0.2,0.5", "--z0", "0.3"])
        assert code == EXIT_USAGE

    def test_integrate_lv_blowup(self, linear_birth_doc, write_config, tmp_path, capsys):
        """Negative competition makes densities explode."""
        linear_birth_doc["rates"]["c"] = "-1"
        code = main(["integrate-lv", "--config", str(write_config(linear_birth_doc)), "--out", str(tmp_path),
                     "--traits", "0.5", "--z0", "1.0", "--horizon", "10", "--dt", "0.01"])
        assert code == EXIT_ABORT


class TestSimulationCommands:
    """Test the stochastic commands on small problems."""

    def test_simulate_tss(self, linear_birth_path, tmp_path, capsys):
        code = main(["simulate-tss", "--config", str(linear_birth_path), "--out", str(tmp_path),
                     "--sigma", "0.2", "--horizon", "0.5", "--replicates", "2"])
        assert code == EXIT_OK
        assert (tmp_path / "tss.0.csv").exists()
        assert (tmp_path / "tss.1.csv").exists()

    def test_simulate_tss_bad_sigma(self, linear_birth_path, tmp_path, capsys):
        code = main(["simulate-tss", "--config", str(linear_birth_path), "--out", str(tmp_path),
                     "--sigma", "1.5"])
        assert code == EXIT_USAGE

    def test_simulate_ibm(self, linear_birth_doc, write_config, tmp_path, capsys):
        linear_birth_doc["scaling"] = {"K": 100, "u": 0.01, "sigma": 0.1, "alpha": 0.2}
        code = main(["simulate-ibm", "--config", str(write_config(linear_birth_doc)), "--out", str(tmp_path),
                     "--horizon", "0.05", "--grid", "3", "--seed", "5"])
        assert code == EXIT_OK
        for part in ("atoms", "summary", "events"):
            assert (tmp_path / f"ibm.0.{part}.csv").exists()
        assert "replicate 0:" in capsys.readouterr().out

    def test_experiment(self, linear_birth_doc, write_config, tmp_path, capsys):
        linear_birth_doc["experiment"] = {"kind": "oracle-suite", "name": "suite", "trials": 200}
        code = main(["experiment", str(write_config(linear_birth_doc)), "--out", str(tmp_path)])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "suite.summary.csv" in out
        assert "timings" not in out
        assert (tmp_path / "suite.timings.json").exists()

    def test_experiment_without_section(self, linear_birth_path, tmp_path, capsys):
        code = main(["experiment", str(linear_birth_path), "--out", str(tmp_path)])
        assert code == EXIT_INVALID
        assert "/experiment" in capsys.readouterr().err


class TestCompareCommand:
    """Test the sup-KR distance of stored files."""

    def test_identical_paths(self, linear_birth_path, tmp_path, capsys):
        """A monomorphic population at its equilibrium on the CEAD path is at distance zero."""
        traj = tmp_path / "atoms.csv"
        traj.write_text("t,trait,count\n0.0,0.0,500\n1.0,0.0,500\n", encoding="utf-8")
        cead = tmp_path / "cead.csv"
        cead.write_text("t,x\n0.0,0.0\n1.0,0.0\n", encoding="utf-8")
        code = main(["compare", "--config", str(linear_birth_path), "--traj", str(traj), "--cead", str(cead)])
        assert code == EXIT_OK
        assert float(capsys.readouterr().out) == pytest.approx(0.0, abs=1e-9)

    def test_missing_columns(self, linear_birth_path, tmp_path, capsys):
        traj = tmp_path / "atoms.csv"
        traj.write_text("t,count\n0.0,500\n", encoding="utf-8")
        cead = tmp_path / "cead.csv"
        cead.write_text("t,x\n0.0,0.0\n", encoding="utf-8")
        code = main(["compare", "--config", str(linear_birth_path), "--traj", str(traj), "--cead", str(cead)])
        assert code == EXIT_INVALID
