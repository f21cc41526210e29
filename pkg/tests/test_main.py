"""
命令行测试：退出码、输出格式
"""
import json
import os

import pytest

import main
from main import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, cli_main
from schemas import SweepConfig

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


def write_config(tmp_path, **sweep) -> str:
    section = {
        "axes": [
            {"name": "g", "min": 0.0, "max": 0.3, "points": 2},
            {"name": "delta", "min": 0.5, "max": 1.0, "points": 2},
        ],
        "quantifiers": ["concurrence", "P0"],
    }
    section.update(sweep)
    config = {
        "model": {"omega": 1.0},
        "bath": {"T": 0.2},
        "sweep": section,
        "output": {"dir": str(tmp_path / "results"), "heatmaps": ["P0"]},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    return str(path)


class TestSweepCommand:

    def test_writes_csv_and_heatmap(self, tmp_path):
        assert cli_main(["sweep", "--config", write_config(tmp_path)]) == EXIT_OK
        results = tmp_path / "results"
        lines = (results / "sweep.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "g,delta,concurrence,P0,n_fock_used,M_used,wall_ms"
        assert len(lines) == 5
        assert (results / "P0.pgm").exists()
        assert (results / "P0.range.txt").exists()

    def test_out_overrides_config_dir(self, tmp_path):
        out = tmp_path / "elsewhere"
        assert cli_main(["sweep", "--config", write_config(tmp_path), "--out", str(out)]) == EXIT_OK
        assert (out / "sweep.csv").exists()

    def test_missing_config(self, tmp_path):
        assert cli_main(["sweep", "--config", str(tmp_path / "absent.json")]) == EXIT_CONFIG

    def test_invalid_config(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("sweep:\n  axes: []\n", encoding="utf-8")
        assert cli_main(["sweep", "--config", str(path)]) == EXIT_CONFIG

    def test_heatmap_needs_requested_field(self, tmp_path):
        config = write_config(tmp_path, quantifiers=["concurrence"])
        assert cli_main(["sweep", "--config", config]) == EXIT_CONFIG

    def test_writes_config_echo(self, tmp_path):
        assert cli_main(["sweep", "--config", write_config(tmp_path)]) == EXIT_OK
        echo = json.loads((tmp_path / "results" / "config_echo.json").read_text(encoding="utf-8"))
        assert echo["critical_coupling"] == "sqrt(omega*delta)/2"
        assert echo["model"]["omega"] == 1.0

    def test_invalid_convergence_target(self, tmp_path):
        config = write_config(tmp_path, convergence_target="photons")
        assert cli_main(["sweep", "--config", config]) == EXIT_CONFIG
        assert not (tmp_path / "results").exists()

    def test_misspelled_key_rejected(self, tmp_path):
        config = write_config(tmp_path, quantifer=["P0"])
        assert cli_main(["sweep", "--config", config]) == EXIT_CONFIG

    def test_failed_points_give_exit_two(self, tmp_path, capsys):
        config = write_config(tmp_path, axes=[
            {"name": "g", "min": 0.5, "max": 5.0, "points": 2},
            {"name": "delta", "min": 0.5, "max": 1.0, "points": 2},
        ], max_fock=64)
        assert cli_main(["sweep", "--config", config]) == EXIT_FAILURE
        assert "CUTOFF_NOT_CONVERGED" in capsys.readouterr().err
        lines = (tmp_path / "results" / "sweep.csv").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 3


class TestSingleShotCommands:

    def test_point_prints_json(self, capsys):
        code = cli_main(["point", "--g1", "0.2", "--g2", "0.2", "--temp", "0.2"])
        assert code == EXIT_OK
        record = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert 0.0 < record["P0"] <= 1.0
        assert record["gap_ratio"] is None
        assert record["n_fock_used"] >= 20

    def test_point_rejects_negative_coupling(self):
        assert cli_main(["point", "--g1", "-0.1"]) == EXIT_CONFIG

    def test_point_rejects_unknown_convergence_target(self, monkeypatch):
        monkeypatch.setattr(main, "CONVERGENCE_TARGET", "bogus")
        assert cli_main(["point", "--g1", "0.2"]) == EXIT_CONFIG

    def test_spectrum_with_temperatures(self, capsys):
        assert cli_main(["spectrum", "--levels", "3", "--temps", "0.1,0.5"]) == EXIT_OK
        out = capsys.readouterr().out.splitlines()
        assert out[0].endswith("g_c=0.5")
        assert out[1] == "k\tE_k-E_0\tparity"
        assert out[2] == "0\t0.0\t+1"
        assert out[5] == "T\tP0"
        assert out[6].startswith("0.1\t")

    def test_spectrum_bad_temperatures(self):
        assert cli_main(["spectrum", "--temps", "0.1,hot"]) == EXIT_CONFIG
        assert cli_main(["spectrum", "--temps", "-0.1"]) == EXIT_CONFIG

    def test_gap(self, capsys):
        code = cli_main(["gap", "--delta1", "1.3", "--delta2", "0.55", "--temp", "0.1"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "ratio=1.0" in out
        assert "converged=True" in out

    def test_unknown_command(self):
        assert cli_main(["anneal"]) == EXIT_CONFIG


@pytest.mark.slow
def test_selftest_passes():
    assert cli_main(["selftest"]) == EXIT_OK


@pytest.mark.parametrize("name", sorted(os.listdir(CONFIG_DIR)))
def test_shipped_configs_are_valid(name):
    config = SweepConfig.from_file(os.path.join(CONFIG_DIR, name))
    assert config.grid_size() >= 60
