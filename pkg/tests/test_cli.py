"""Tests for the command-line entry point and the oracle suite."""

import pandas as pd
import pytest

from wavelab.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, cli_main
from wavelab.services.oracle_check import oracle_configs, run_oracle_check

SMALL_SCENARIO = """\
schema_version: 1
name: cli_small
kind: ber
frame:
  waveform: OFDM
  M: 16
  N: 2
  delta_f: 15000.0
  prefix: {kind: FullCP, length: 4}
channel: {profile: EVA, doppler_max_hz: 100.0}
estimation: {domain: Genie}
equalization: {method: one_tap}
snr_db: [10.0, 20.0]
trials: 2
seed: 9
"""

BAD_COMBO = SMALL_SCENARIO.replace("equalization: {method: one_tap}", "equalization: {domain: Affine, method: mmse}")


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "small.scn"
    path.write_text(SMALL_SCENARIO)
    return path


# ============================================================================
# USAGE
# ============================================================================


class TestUsage:
    def test_missing_file(self, capsys):
        assert cli_main(["run", "missing.scn"]) == EXIT_USAGE
        assert "missing.scn" in capsys.readouterr().out

    def test_no_command(self):
        assert cli_main([]) == EXIT_USAGE

    def test_unknown_command(self):
        assert cli_main(["plot"]) == EXIT_USAGE

    def test_workers_must_be_positive(self, scenario_file, capsys):
        assert cli_main(["run", str(scenario_file), "--workers", "0"]) == EXIT_USAGE
        assert "--workers" in capsys.readouterr().out

    def test_version(self):
        assert cli_main(["--version"]) == EXIT_OK


# ============================================================================
# SUBCOMMANDS
# ============================================================================


class TestCommands:
    def test_run_writes_result(self, scenario_file, tmp_path, capsys):
        out_dir = tmp_path / "results"
        assert cli_main(["run", str(scenario_file), "--out", str(out_dir), "--workers", "2"]) == EXIT_OK
        assert (out_dir / "cli_small.json").exists()
        out = capsys.readouterr().out
        assert "RESULT: cli_small" in out
        assert "Result file" in out

    def test_export_plotdata(self, scenario_file, tmp_path):
        out_dir = tmp_path / "results"
        assert cli_main(["run", str(scenario_file), "--out", str(out_dir)]) == EXIT_OK
        csv = tmp_path / "plot" / "cli_small.csv"
        assert cli_main(["export-plotdata", str(out_dir / "cli_small.json"), str(csv)]) == EXIT_OK
        assert pd.read_csv(csv)["snr_db"].tolist() == [10.0, 20.0]

    def test_export_missing_record(self, tmp_path):
        assert cli_main(["export-plotdata", str(tmp_path / "none.json"), str(tmp_path / "x.csv")]) == EXIT_USAGE

    def test_analyze(self, scenario_file, capsys):
        assert cli_main(["analyze", str(scenario_file)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "ANALYSIS: cli_small" in out
        assert "Delay resolution: 4166.67 ns" in out
        assert "Taps per row (DelayDoppler)" in out
        assert "Affine" not in out

    def test_runtime_error_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.scn"
        path.write_text(BAD_COMBO)
        assert cli_main(["run", str(path), "--out", str(tmp_path)]) == EXIT_RUNTIME
        assert "ScenarioError" in capsys.readouterr().out

    def test_list_scenarios(self, capsys):
        assert cli_main(["list-scenarios"]) == EXIT_OK
        out = capsys.readouterr().out
        for name in ("awgn_qpsk", "birth_death_otfs", "static_ofdm_one_tap", "eva_afdm_affine"):
            assert name in out

    def test_list_other_directory(self, scenario_file, capsys):
        assert cli_main(["list-scenarios", "--dir", str(scenario_file.parent)]) == EXIT_OK
        assert "cli_small" in capsys.readouterr().out

    def test_oracle_check(self, capsys):
        assert cli_main(["oracle-check", "--seed", "3"]) == EXIT_OK
        assert "checks passed" in capsys.readouterr().out


# ============================================================================
# ORACLE SUITE
# ============================================================================


class TestOracleSuite:
    def test_every_waveform_covered(self):
        waveforms = {cfg.waveform for cfg in oracle_configs(((8, 4),))}
        assert len(waveforms) == 5

    def test_all_checks_pass(self):
        results = run_oracle_check(seed=1, sizes=((8, 4), (16, 2)))
        assert results
        failed = [(r.name, r.max_error) for r in results if not r.passed]
        assert failed == []
