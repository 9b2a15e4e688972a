"""Command-line interface: subcommands, exit codes, artifacts."""

import json
import pathlib

import pytest

from tritank.cli import main

CONFIG_DIR = pathlib.Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def scenario_file(tmp_path):
    cfg = {
        "mode": "akf-estimation",
        "duration": 60.0,
        "seed": 3,
        "noise_sigma": [0.005, 0.005, 0.005],
    }
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(cfg))
    return path


class TestLinearize:
    def test_prints_matrices(self, capsys):
        assert main(["linearize"]) == 0
        out = capsys.readouterr().out
        assert "F =" in out and "A_d =" in out and "B_d =" in out

    def test_bad_operating_point_is_config_error(self, capsys):
        assert main(["linearize", "--y0", "0.2", "0.3", "0.4"]) == 1
        assert "config error" in capsys.readouterr().err


class TestDesign:
    def test_prints_gain_and_spectrum(self, capsys):
        assert main(["design"]) == 0
        out = capsys.readouterr().out
        assert "K =" in out and "closed-loop eigenvalues" in out

    def test_overrepeated_lambdas_numerical_failure(self, capsys):
        assert main(["design", "--lambdas", "0.9", "0.9", "0.9", "0.95", "0.97"]) == 2
        assert "numerical failure" in capsys.readouterr().err


class TestSimulate:
    def test_writes_csv_and_metrics(self, scenario_file, tmp_path, capsys):
        out = tmp_path / "run.csv"
        assert main(["simulate", "--config", str(scenario_file), "--output", str(out)]) == 0
        assert out.exists()
        stdout = capsys.readouterr().out
        assert "estimation_rmse" in stdout

    def test_figures_rendered(self, scenario_file, tmp_path):
        out = tmp_path / "run.csv"
        figs = tmp_path / "figs"
        assert main([
            "simulate", "--config", str(scenario_file), "--output", str(out),
            "--figures", str(figs),
        ]) == 0
        assert (figs / "run_levels.png").exists()
        assert (figs / "run_diagnostics.png").exists()

    def test_figures_default_location(self, scenario_file, tmp_path):
        out = tmp_path / "run.csv"
        assert main([
            "simulate", "--config", str(scenario_file), "--output", str(out), "--figures",
        ]) == 0
        assert (tmp_path / "run_levels.png").exists()

    def test_seed_override_changes_output(self, scenario_file, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        main(["simulate", "--config", str(scenario_file), "--output", str(a)])
        main(["simulate", "--config", str(scenario_file), "--output", str(b), "--seed", "99"])
        assert a.read_text() != b.read_text()

    def test_missing_config_file(self, tmp_path, capsys):
        out = tmp_path / "x.csv"
        assert main(["simulate", "--config", str(tmp_path / "nope.json"), "--output", str(out)]) == 1

    def test_invalid_mode_config_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"mode": "nonsense"}))
        assert main(["simulate", "--config", str(path), "--output", str(tmp_path / "o.csv")]) == 1


class TestShippedConfigs:
    @pytest.mark.parametrize("name", [p.name for p in sorted(CONFIG_DIR.glob("*.json"))])
    def test_config_runs_and_renders(self, name, tmp_path):
        out = tmp_path / "run.csv"
        figs = tmp_path / "figs"
        code = main([
            "simulate", "--config", str(CONFIG_DIR / name), "--output", str(out),
            "--duration", "40", "--figures", str(figs),
        ])
        assert code == 0
        assert out.exists()
        assert (figs / "run_levels.png").exists()
        assert (figs / "run_diagnostics.png").exists()


class TestMetrics:
    def test_recompute_from_csv(self, scenario_file, tmp_path, capsys):
        out = tmp_path / "run.csv"
        main(["simulate", "--config", str(scenario_file), "--output", str(out)])
        capsys.readouterr()
        assert main(["metrics", "--csv", str(out), "--burn-in", "10"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["n_records"] == 60
        assert report["estimation_rmse"] is not None

    def test_missing_csv(self, tmp_path):
        assert main(["metrics", "--csv", str(tmp_path / "nope.csv")]) == 1
