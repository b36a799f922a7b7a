"""End-to-end runs of every CLI subcommand."""

import json

import numpy as np
from click.testing import CliRunner

from kglab.cli import main
from kglab.data_factory import BumpSpec, bump_data
from kglab.functionals import CouplingParams, state_from_csv
from kglab.grid import build_grid


def _write_cfg(tmp_path, body, name="exp.cfg"):
    p = tmp_path / name
    p.write_text(body, encoding="utf-8")
    return p


def _zero_cfg(tmp_path):
    return _write_cfg(
        tmp_path,
        "grid.r_max = 20\n"
        "grid.n = 128\n"
        "data.family = zero\n"
        "sim.dt = 0.01\n"
        "sim.t_end = 0.5\n"
        f"output.directory = {tmp_path / 'out'}\n",
    )


def _bump_cfg(tmp_path):
    return _write_cfg(
        tmp_path,
        "grid.r_max = 25\n"
        "grid.n = 512\n"
        "coupling.beta = 0.5\n"
        "data.family = bump\n"
        "data.R = 2\n"
        f"output.directory = {tmp_path / 'out'}\n",
    )


class TestSimulate:
    def test_runs_and_prints_summary(self, tmp_path):
        cfg = _zero_cfg(tmp_path)
        result = CliRunner().invoke(main, ["simulate", "--config", str(cfg)])
        assert result.exit_code == 0, result.output
        summary = json.loads(result.output)
        assert summary["simulation"]["outcome"] == "Completed"
        assert (tmp_path / "out" / "summary.json").exists()

    def test_out_override(self, tmp_path):
        cfg = _zero_cfg(tmp_path)
        result = CliRunner().invoke(
            main,
            ["simulate", "--config", str(cfg), "--out", str(tmp_path / "elsewhere")],
        )
        assert result.exit_code == 0, result.output
        assert (tmp_path / "elsewhere" / "summary.json").exists()
        assert not (tmp_path / "out").exists()

    def test_bad_config_fails(self, tmp_path):
        cfg = _write_cfg(tmp_path, "grid.n = 8\n", name="bad.cfg")
        result = CliRunner().invoke(main, ["simulate", "--config", str(cfg)])
        assert result.exit_code == 1
        assert "grid.n" in result.output

    def test_missing_file_fails(self, tmp_path):
        result = CliRunner().invoke(
            main, ["simulate", "--config", str(tmp_path / "nope.cfg")]
        )
        assert result.exit_code != 0


class TestClassify:
    def test_finding_exits_zero(self, tmp_path):
        cfg = _bump_cfg(tmp_path)
        result = CliRunner().invoke(main, ["classify", "--config", str(cfg)])
        assert result.exit_code == 0, result.output
        verdict = json.loads(result.output)
        assert verdict["prediction"] == "BlowUp"
        assert verdict["findings"]

    def test_no_finding_exits_two(self, tmp_path):
        cfg = _zero_cfg(tmp_path)
        result = CliRunner().invoke(main, ["classify", "--config", str(cfg)])
        assert result.exit_code == 2, result.output
        assert json.loads(result.output)["prediction"] == "Inconclusive"


class TestGroundstate:
    def test_writes_profile_and_level(self, tmp_path):
        result = CliRunner().invoke(
            main,
            [
                "groundstate",
                "--beta",
                "1",
                "--r-max",
                "35",
                "--n",
                "512",
                "--out",
                str(tmp_path),
            ],
        )
        assert result.exit_code == 0, result.output
        info = json.loads((tmp_path / "groundstate.json").read_text())
        assert info["beta"] == 1.0
        assert 0.0 < info["d_level"] < 25.0
        lines = (tmp_path / "groundstate.csv").read_text().splitlines()
        assert lines[0] == "r,phi,psi"
        assert len(lines) == 1 + 512

    def test_bad_beta_fails(self, tmp_path):
        result = CliRunner().invoke(
            main, ["groundstate", "--beta", "-2", "--out", str(tmp_path)]
        )
        assert result.exit_code == 1
        assert "Error:" in result.output


class TestSweep:
    def test_small_axis(self, tmp_path):
        cfg = _zero_cfg(tmp_path)
        result = CliRunner().invoke(
            main,
            [
                "sweep",
                "--config",
                str(cfg),
                "--param",
                "sim.t_end",
                "--values",
                "0.2,0.3",
            ],
        )
        assert result.exit_code == 0, result.output
        lines = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
        assert len(lines) == 3

    def test_bad_values_fail(self, tmp_path):
        cfg = _zero_cfg(tmp_path)
        result = CliRunner().invoke(
            main,
            ["sweep", "--config", str(cfg), "--param", "sim.t_end", "--values", "a,b"],
        )
        assert result.exit_code == 1


class TestVerifyIdentities:
    def test_identities_hold(self):
        result = CliRunner().invoke(main, ["verify-identities", "--count", "25"])
        assert result.exit_code == 0, result.output
        assert "all identities hold" in result.output


class TestMakeData:
    def test_round_trip_matches_factory(self, tmp_path):
        cfg = _bump_cfg(tmp_path)
        out = tmp_path / "datum.csv"
        result = CliRunner().invoke(
            main, ["make-data", "--config", str(cfg), "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        assert str(out) in result.output
        grid = build_grid(25.0, 512)
        loaded = state_from_csv(str(out), grid)
        expected = bump_data(BumpSpec(R=2.0, grid=grid), CouplingParams(beta=0.5))
        assert np.array_equal(loaded.u.values, expected.u.values)
        assert np.array_equal(loaded.v.values, expected.v.values)

    def test_unknown_family_fails(self, tmp_path):
        cfg = _write_cfg(tmp_path, "data.family = plane\n", name="bad.cfg")
        result = CliRunner().invoke(
            main,
            ["make-data", "--config", str(cfg), "--out", str(tmp_path / "x.csv")],
        )
        assert result.exit_code == 1
        assert "data.family" in result.output
