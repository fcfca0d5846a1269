import json

import pytest
import yaml

from mmwshare import cli
from mmwshare.cli import CliConfigError, load_config
from mmwshare.scenarios import TABLE_HEADER


@pytest.fixture
def config_path(tmp_path):
    doc = {
        "sim": {
            "seed": 0,
            "num_realizations": 3,
            "pretrain_samples": 30,
            "pretrain_epochs": 10,
            "update_epochs": 1,
        },
        "topology": {"builder": "toy"},
        "run": {"num_cis": 20, "knowledge": "full"},
    }
    path = tmp_path / "scenario.yaml"
    path.write_text(yaml.safe_dump(doc))
    return path


class TestLoadConfig:
    def test_valid(self, config_path):
        config, topo, run = load_config(config_path)
        assert config.seed == 0
        assert topo["builder"] == "toy"
        assert run["num_cis"] == 20

    def test_missing_file(self, tmp_path):
        with pytest.raises(CliConfigError, match="not found"):
            load_config(tmp_path / "nope.yaml")

    def test_unknown_top_level_key(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("simulation: {}\n")
        with pytest.raises(CliConfigError, match="top-level"):
            load_config(path)

    def test_unknown_sim_key(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("sim:\n  sed: 3\n")
        with pytest.raises(CliConfigError, match="sim keys"):
            load_config(path)

    def test_unknown_run_key(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("run:\n  cis: 10\n")
        with pytest.raises(CliConfigError, match="run keys"):
            load_config(path)

    def test_invalid_value(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("sim:\n  n_bs_antennas: -4\n")
        with pytest.raises(CliConfigError, match="invalid sim"):
            load_config(path)

    def test_overrides_win(self, config_path):
        config, _, _ = load_config(config_path, {"seed": 9})
        assert config.seed == 9


class TestRunCommand:
    def test_writes_artifacts(self, config_path, tmp_path, capsys):
        out = tmp_path / "out"
        code = cli.main(["run", "--config", str(config_path), "--out", str(out)])
        assert code == 0
        for name in ("timeseries.csv", "summary.json", "manifest.json"):
            assert (out / name).exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["scenario"] == "run"
        assert sorted(manifest["outputs"]) == ["summary.json", "timeseries.csv"]
        lines = (out / "timeseries.csv").read_text().splitlines()
        assert len(lines) == 21  # header + 20 CIs

    def test_rerun_byte_identical(self, config_path, tmp_path):
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert cli.main(["run", "--config", str(config_path), "--out", str(out1)]) == 0
        assert cli.main(["run", "--config", str(config_path), "--out", str(out2)]) == 0
        assert (out1 / "timeseries.csv").read_bytes() == (
            out2 / "timeseries.csv"
        ).read_bytes()
        assert (out1 / "summary.json").read_bytes() == (
            out2 / "summary.json"
        ).read_bytes()

    def test_requires_out(self, config_path, capsys):
        assert cli.main(["run", "--config", str(config_path)]) == cli.EXIT_CONFIG

    def test_config_error_exit_code(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("sim:\n  sed: 3\n")
        code = cli.main(["run", "--config", str(path), "--out", str(tmp_path / "o")])
        assert code == cli.EXIT_CONFIG

    def test_infeasible_exit_code(self, config_path, tmp_path):
        # a tiny coordination budget cannot even pay for serving links
        code = cli.main(
            [
                "run",
                "--config",
                str(config_path),
                "--out",
                str(tmp_path / "o"),
                "--budget",
                "3",
            ]
        )
        assert code == cli.EXIT_INFEASIBLE


class TestTable2Command:
    def test_golden_header_and_rows(self, config_path, tmp_path, capsys):
        out = tmp_path / "tab"
        code = cli.main(
            [
                "table2",
                "--config",
                str(config_path),
                "--out",
                str(out),
                "--no-optimal",
            ]
        )
        assert code == 0
        lines = (out / "comparison.csv").read_text().strip().splitlines()
        assert lines[0] == ",".join(TABLE_HEADER)
        labels = [line.split(",")[0] for line in lines[1:]]
        assert labels == ["a", "b", "c"]

    def test_stdout_without_out(self, config_path, capsys):
        code = cli.main(
            ["table2", "--config", str(config_path), "--no-optimal"]
        )
        assert code == 0
        captured = capsys.readouterr().out
        assert captured.splitlines()[0].strip() == ",".join(TABLE_HEADER)


class TestBaselineCommand:
    def test_closest_bs_summary(self, config_path, tmp_path, capsys):
        out = tmp_path / "base"
        code = cli.main(
            ["baseline", "--config", str(config_path), "--out", str(out)]
        )
        assert code == 0
        summary = json.loads((out / "baseline.json").read_text())
        # UE 6 associates with its own operator's BS 3, not the closer BS 1
        assert summary["A"][2][5] == "1"
        assert summary["costs"] == [5.0, 5.0]

    def test_antenna_override(self, config_path, capsys):
        code = cli.main(
            ["baseline", "--config", str(config_path), "--antennas", "small"]
        )
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert len(out["rates_gbps"]) == 10


class TestParser:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["--version"])
        assert exc.value.code == 0

    def test_requires_subcommand(self):
        with pytest.raises(SystemExit):
            cli.main([])
