#!/usr/bin/env python3
"""
Integration tests for the check / simulate / compare commands
"""

import dataclasses
import json

import numpy as np
import pytest

from reduction_engine import bundle
from reduction_engine.dynamics import initial_lift
from runner import cli
from runner.output import read_trajectory


def run(*argv):
    return cli.main([str(arg) for arg in argv])


def job(tmp_path, text):
    path = tmp_path / "job.toml"
    path.write_text(text)
    return path


ABELIAN_JOB = """
model = "abelian_disk"

[initial]
x = [1.0]
f = [0.5, -0.2]
xdot = [0.1]
fdot = [0.0, 0.3]
p = [0.4]
"""


class TestCheckCommand:

    @pytest.mark.parametrize("model", ["abelian_disk", "so3_coupled", "flat_product"])
    def test_passes(self, model, output_dir):
        report = output_dir / f"{model}.json"
        assert run("check", "--model", model, "--samples", 4, "--output", report) == cli.EXIT_OK
        document = json.loads(report.read_text())
        assert document["passed"] is True
        names = {entry["name"] for entry in document["entries"]}
        assert {"structure_jacobi", "killing_bracket_P", "block_inverse", "fd_section"} <= names

    def test_perturbed_inverse_fails(self, mocker, output_dir):
        original = bundle._inverse_blocks

        def perturbed(*args):
            inv_hh, inv_hv, inv_vv = original(*args)
            return inv_hh, inv_hv + 1e-3, inv_vv

        mocker.patch.object(bundle, "_inverse_blocks", perturbed)
        report = output_dir / "report.json"
        code = run("check", "--model", "abelian_disk", "--samples", 3, "--output", report)
        assert code == cli.EXIT_VERIFICATION
        failed = {e["name"] for e in json.loads(report.read_text())["entries"] if not e["passed"]}
        assert "inverse_cross_projection" in failed

    @pytest.mark.slow
    def test_full_sample_count(self, output_dir):
        assert run("check", "--model", "so3_coupled", "--workers", 4) == cli.EXIT_OK


class TestSimulateCommand:

    def test_csv_output(self, tmp_path, output_dir):
        out = output_dir / "run.csv"
        code = run("simulate", "--config", job(tmp_path, ABELIAN_JOB), "--t-final", 0.5,
                   "--dt", 0.01, "--output", out)
        assert code == cli.EXIT_OK
        trajectory = read_trajectory(str(out))
        assert len(trajectory.times) == 51
        assert np.all(trajectory.states[:, -1] == 0.4)
        assert np.max(np.abs(trajectory.energies - trajectory.energies[0])) <= 1e-7

    def test_runs_are_byte_identical(self, tmp_path, output_dir):
        config = job(tmp_path, ABELIAN_JOB)
        out = output_dir / "run.json"
        contents = []
        for _ in range(2):
            assert run("simulate", "--config", config, "--t-final", 0.2, "--dt", 0.01,
                       "--format", "json", "--output", out) == cli.EXIT_OK
            contents.append(out.read_bytes())
        assert contents[0] == contents[1]

    def test_rkf45(self, tmp_path, output_dir):
        out = output_dir / "adaptive.json"
        code = run("simulate", "--config", job(tmp_path, 'integrator = "rkf45"\n' + ABELIAN_JOB),
                   "--t-final", 0.3, "--dt", 0.1, "--format", "json", "--output", out)
        assert code == cli.EXIT_OK
        assert read_trajectory(str(out)).metadata["method"] == "rkf45"

    def test_state_outside_domain(self):
        """Default initial state puts the abelian model at the origin"""
        code = run("simulate", "--model", "abelian_disk", "--t-final", 0.1, "--dt", 0.01)
        assert code == cli.EXIT_RUNTIME

    def test_metrics_written(self, tmp_path, output_dir):
        metrics = output_dir / "metrics.prom"
        run("simulate", "--config", job(tmp_path, ABELIAN_JOB), "--t-final", 0.05,
            "--dt", 0.01, "--metrics-out", metrics)
        assert 'lp_rhs_evaluations_total{system="reduced"}' in metrics.read_text()


class TestCompareCommand:

    def test_abelian_agreement(self, tmp_path, output_dir):
        out = output_dir / "compare.json"
        code = run("compare", "--config", job(tmp_path, ABELIAN_JOB), "--t-final", 0.5,
                   "--dt", 5e-3, "--output", out)
        assert code == cli.EXIT_OK
        result = json.loads(out.read_text())
        assert result["passed"] is True
        assert result["rows_compared"] == 101
        assert result["max_dx"] <= 1e-6

    def test_flipped_momentum_is_detected(self, tmp_path, output_dir, mocker):
        """Lifting with -p instead of p makes the two runs disagree"""

        def flipped(model, state):
            return initial_lift(model, dataclasses.replace(state, p=-state.p))

        mocker.patch.object(cli, "initial_lift", flipped)
        out = output_dir / "compare.json"
        code = run("compare", "--config", job(tmp_path, ABELIAN_JOB), "--t-final", 0.5,
                   "--dt", 5e-3, "--output", out)
        assert code == cli.EXIT_VERIFICATION
        assert json.loads(out.read_text())["max_dx"] > 1e-5


class TestUsageErrors:

    @pytest.mark.parametrize(
        "argv",
        [
            [],
            ["launch"],
            ["simulate", "--model", "double_pendulum"],
            ["simulate", "--config", "/nonexistent/job.toml"],
            ["simulate", "--dt", "-1"],
            ["simulate", "--format", "xml"],
            ["check", "--model", "so3_coupled", "--samples", "0"],
        ],
    )
    def test_exit_code_one(self, argv):
        assert cli.main(argv) == cli.EXIT_USAGE

    def test_bad_parameters(self, tmp_path):
        config = job(tmp_path, 'model = "so3_coupled"\n[params]\nlam = 5.0\n')
        assert run("check", "--config", config) == cli.EXIT_USAGE
