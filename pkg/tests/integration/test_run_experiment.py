"""End-to-end tests of the experiment runner CLI."""
import json

import pytest

from hjminimax.core.exceptions import ShootingError
from hjminimax.jobs.run_experiment import main

pytestmark = pytest.mark.integration


def run(subcommand, config_path, out, *extra):
    return main([subcommand, "--config", str(config_path), "--output", str(out), *extra])


class TestSubcommands:
    """Test that each subcommand writes its artifacts."""

    def test_solve_minimax(self, tmp_path, write_config, zero_run_config, capsys):
        out = tmp_path / "out"
        assert run("solve-minimax", write_config(zero_run_config), out) == 0
        for name in ("minimax_trace.csv", "minimax_certificates.csv", "minimax_final.csv",
                     "manifest.json", "README.md", "plot.py"):
            assert (out / name).exists(), name
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["subcommand"] == "solve-minimax"
        assert manifest["config"]["output_dir"] is None
        assert "threads" not in manifest["config"]["selector"]
        assert manifest["summary"]["steps"] == 1
        assert "PASSED" in capsys.readouterr().out

    def test_solve_viscosity(self, tmp_path, write_config, zero_run_config):
        out = tmp_path / "out"
        assert run("solve-viscosity", write_config(zero_run_config), out) == 0
        assert (out / "viscosity.csv").exists()
        assert (out / "refinement.csv").exists()
        # no momentum profile, so no Hopf-Lax table
        assert not (out / "hopf_lax.csv").exists()
        summary = json.loads((out / "manifest.json").read_text())["summary"]
        assert summary["monotone"] is True

    def test_compare_with_hopf_lax(self, tmp_path, write_config, zero_run_config):
        zero_run_config.update({"hamiltonian": {"key": "discount"}, "initial": {"key": "linear",
                                                                               "params": {"slope": 0.5}}})
        out = tmp_path / "out"
        assert run("compare", write_config(zero_run_config), out) == 0
        verdict = json.loads((out / "verdict.json").read_text())
        assert verdict["steps"] == 1
        header = (out / "compare.csv").read_text().splitlines()[0]
        assert header == "t,x,minimax,reference,hopf_lax,abs_error"

    def test_convergence_study(self, tmp_path, write_config, zero_run_config):
        zero_run_config["time"]["partition_norms"] = [0.25, 0.125]
        zero_run_config["reference"] = {"threshold": 0.2}
        out = tmp_path / "out"
        assert run("convergence-study", write_config(zero_run_config), out) == 0
        verdict = json.loads((out / "verdict.json").read_text())
        assert verdict["final_below_threshold"]
        assert len((out / "convergence.csv").read_text().splitlines()) == 3

    def test_wavefront(self, tmp_path, write_config, zero_run_config):
        zero_run_config["wavefront"] = {"seeds": 41}
        zero_run_config["plot"] = "gnuplot"
        out = tmp_path / "out"
        assert run("wavefront", write_config(zero_run_config), out) == 0
        assert (out / "front.csv").exists()
        assert (out / "plot.gp").exists()
        summary = json.loads((out / "manifest.json").read_text())["summary"]
        assert summary["first_fold"] is None

    @pytest.mark.slow
    def test_self_check(self, tmp_path, write_config, zero_run_config):
        zero_run_config["self_check"] = {"pairs": 2, "points": 3}
        out = tmp_path / "out"
        assert run("self-check", write_config(zero_run_config), out, "--seed", "7") == 0
        header = (out / "self_check.csv").read_text().splitlines()[0]
        assert header == "check,case,observed,allowed,passed"


class TestDeterminism:
    def test_identical_runs_give_identical_files(self, tmp_path, write_config, zero_run_config):
        path = write_config(zero_run_config)
        first, second = tmp_path / "a", tmp_path / "b"
        assert run("solve-minimax", path, first) == 0
        assert run("solve-minimax", path, second, "--threads", "2") == 0
        for produced in sorted(first.iterdir()):
            assert produced.read_bytes() == (second / produced.name).read_bytes(), produced.name


class TestExitCodes:
    """Test that failures map to the documented exit codes."""

    def test_unknown_hamiltonian(self, tmp_path, write_config, zero_run_config, capsys):
        zero_run_config["hamiltonian"] = {"key": "eikonal"}
        assert run("solve-minimax", write_config(zero_run_config), tmp_path / "out") == 2
        assert "Unknown key 'eikonal'" in capsys.readouterr().err

    def test_malformed_config(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{")
        assert run("solve-minimax", path, tmp_path / "out") == 2

    def test_missing_config(self, tmp_path):
        assert run("solve-minimax", tmp_path / "absent.json", tmp_path / "out") == 2

    def test_bad_thread_count(self, tmp_path, write_config, zero_run_config):
        assert run("solve-minimax", write_config(zero_run_config), tmp_path / "out", "--threads", "0") == 2

    def test_numerical_failure(self, tmp_path, write_config, zero_run_config, mocker, capsys):
        mocker.patch("hjminimax.jobs.run_experiment.iterated_minimax",
                     side_effect=ShootingError(50, 1.0))
        assert run("solve-minimax", write_config(zero_run_config), tmp_path / "out") == 3
        assert "ERROR" in capsys.readouterr().err

    def test_unknown_subcommand(self, tmp_path, write_config, zero_run_config):
        with pytest.raises(SystemExit) as exc:
            run("solve-everything", write_config(zero_run_config), tmp_path / "out")
        assert exc.value.code == 2
