"""Command-line plumbing: exit codes, artifacts, config flow."""

import json

import numpy as np
import pytest

from nlslab import reporting
from nlslab.cli import main


def test_no_command_is_usage_error(capsys):
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_command_is_usage_error():
    assert main(["frobnicate"]) == 2


def test_version_exits_clean():
    assert main(["--version"]) == 0


def test_bad_threads_env(monkeypatch, tmp_path, capsys):
    monkeypatch.setenv("NLSLAB_THREADS", "zero")
    code = main(["groundstate", "--out-dir", str(tmp_path)])
    assert code == 3
    assert "NLSLAB_THREADS" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    code = main(
        ["groundstate", "--config", str(tmp_path / "no.conf"), "--out-dir", str(tmp_path)]
    )
    assert code == 3


class TestGroundstate:
    def test_artifacts(self, tmp_path):
        assert main(["groundstate", "--out-dir", str(tmp_path)]) == 0
        for name in ("q.csv", "rho.csv", "constants.json", "profiles.svg"):
            assert (tmp_path / name).exists(), name
        cols, data = reporting.read_table(tmp_path / "q.csv")
        assert cols == ["r", "value"]
        assert data[0, 1] == pytest.approx(2.2062008646, abs=1e-9)
        doc = json.loads((tmp_path / "constants.json").read_text())
        assert doc["mass_q"] == pytest.approx(11.7008965258, abs=1e-9)
        assert doc["provenance"]["code_version"]


class TestInteractions:
    def test_sweep_with_config(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("interactions.omegas = 8, 10\n")
        code = main(
            ["interactions", "--config", str(conf), "--out-dir", str(tmp_path)]
        )
        assert code == 0
        cols, data = reporting.read_table(tmp_path / "interactions.csv")
        assert cols == ["omega_norm", "quadrature", "asymptotic", "ratio"]
        assert data.shape == (2, 4)
        assert np.all(np.abs(data[:, 3] - 1.0) < 0.15)
        assert (tmp_path / "interactions_ratio.svg").exists()


class TestReducedOde:
    def test_shoot_flags(self, tmp_path):
        code = main(
            [
                "reduced-ode", "shoot",
                "--s-in", "1e4", "--s0", "1e3", "--tol", "1e-10",
                "--out", "traj.csv", "--out-dir", str(tmp_path),
            ]
        )
        assert code == 0
        cols, data = reporting.read_table(tmp_path / "traj.csv")
        assert cols == ["s", "lambda", "z", "gamma", "beta", "b", "a", "zeta", "xi", "t"]
        assert data[0, 0] == pytest.approx(1e4)
        doc = json.loads((tmp_path / "shoot.json").read_text())
        assert doc["converged"] is True
        assert (tmp_path / "survivor_bands.svg").exists()


class TestPde:
    def test_short_gaussian_run(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text(
            "pde.data = gaussian\npde.amp = 0.5\npde.n = 64\npde.box = 10\n"
            "pde.dt = 1e-3\npde.steps = 10\npde.stride = 5\n"
        )
        code = main(["pde", "--config", str(conf), "--out-dir", str(tmp_path)])
        assert code == 0
        cols, data = reporting.read_table(tmp_path / "pde_log.csv")
        assert cols == ["t", "mass", "energy", "variance", "max_amp", "grad_norm"]
        assert data.shape[0] == 3
        doc = json.loads((tmp_path / "pde_summary.json").read_text())
        assert doc["mass_drift"] <= 1e-12

    def test_bad_data_kind(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("pde.data = vortex\n")
        assert main(["pde", "--config", str(conf), "--out-dir", str(tmp_path)]) == 3


class TestTrack:
    def test_short_backward_run(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("track.s_end = 48.5\ntrack.n = 512\n")
        code = main(["track", "--config", str(conf), "--out-dir", str(tmp_path)])
        assert code == 0
        cols, data = reporting.read_table(tmp_path / "track.csv")
        assert cols[:3] == ["t", "s_proxy", "lambda"]
        assert data.shape[1] == 15
        doc = json.loads((tmp_path / "track_summary.json").read_text())
        assert doc["truncated"] is False
        assert (tmp_path / "track_residuals.svg").exists()


class TestAcceptance:
    def test_single_green_criterion(self, tmp_path, capsys):
        code = main(
            ["acceptance", "--criteria", "2", "--out-dir", str(tmp_path)]
        )
        assert code == 0
        assert "criterion 2" in capsys.readouterr().out
        doc = json.loads((tmp_path / "acceptance.json").read_text())
        assert doc["all_passed"] is True
        assert doc["criteria"][0]["index"] == 2
        assert (tmp_path / "criterion2_nullspace.csv").exists()

    def test_red_criterion_exits_five(self, tmp_path):
        # criterion 6 is documented red on the lambda log s band
        code = main(["acceptance", "--criteria", "6", "--out-dir", str(tmp_path)])
        assert code == 5
        doc = json.loads((tmp_path / "acceptance.json").read_text())
        assert doc["all_passed"] is False

    def test_unknown_criterion(self, tmp_path):
        assert main(["acceptance", "--criteria", "12", "--out-dir", str(tmp_path)]) == 3


class TestPlot:
    @pytest.fixture
    def csv(self, tmp_path):
        x = np.linspace(1.0, 5.0, 10)
        return reporting.write_table(
            tmp_path / "d.csv", ("s", "v"), np.column_stack([x, x**2]), None
        )

    def test_renders(self, csv, tmp_path):
        out = tmp_path / "fig.svg"
        code = main(
            ["plot", str(csv), "--x", "s", "--y", "v", "--logy", "--out", str(out)]
        )
        assert code == 0
        assert out.read_bytes().startswith(b"<?xml")

    def test_missing_column_exit(self, csv, tmp_path, capsys):
        code = main(["plot", str(csv), "--x", "s", "--y", "w", "--out-dir", str(tmp_path)])
        assert code == 3
        assert "missing column" in capsys.readouterr().err
