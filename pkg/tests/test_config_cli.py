import os
import subprocess
import sys

import pytest

from posbeam.cli import load_config, main
from posbeam.config import (ConfigError, ExperimentConfig, config_equal, parse_config_text,
                            serialize_config)


def test_empty_file_gives_table_defaults():
    cfg = parse_config_text("")
    assert cfg.radio.carrier_hz == 28e9
    assert cfg.radio.bandwidth_hz == 100e6          # table's "100 GHz" read as MHz
    assert cfg.radio.subcarrier_spacing_hz == 120e3
    assert cfg.radio.tx_power_w == 0.2
    assert cfg.radio.noise_figure_db == 3.0
    assert cfg.scenario.trp_height_m == 7.0
    assert cfg.positioning.pilot_interval_s == 0.010
    assert cfg.positioning.pilot_subcarriers == 40
    assert cfg.positioning.pilot_subcarrier_spacing_hz == 15e3
    assert cfg.beam.sweep_subframe_s == 0.000125
    assert cfg.beam.trp_beams == 16 and cfg.beam.device_beams == 8


def test_negative_isd_rejected():
    with pytest.raises(ConfigError, match="isds_m"):
        parse_config_text("[matrix]\nisds_m = -5\n")


def test_unknown_key_named():
    with pytest.raises(ConfigError, match="frobnicate"):
        parse_config_text("[scenario]\nfrobnicate = 3\n")
    with pytest.raises(ConfigError, match="warp"):
        parse_config_text("[warp]\nx = 1\n")


def test_type_mismatch_reports_path_and_type():
    with pytest.raises(ConfigError, match=r"\[scenario\] blocks_x: expected int"):
        parse_config_text("[scenario]\nblocks_x = many\n")


def test_roundtrip_parse_serialize_parse():
    text = """
[scenario]
world = line
duration_s = 12.5
[matrix]
modes = doa_only, doa_toa
isds_m = 25, 50
n_seeds = 3
"""
    cfg = parse_config_text(text)
    again = parse_config_text(serialize_config(cfg))
    assert config_equal(cfg, again)


def test_unknown_enum_values_rejected():
    with pytest.raises(ConfigError):
        parse_config_text("[matrix]\nmodes = doa_psychic\n")
    with pytest.raises(ConfigError):
        parse_config_text("[matrix]\nclasses = submarine\n")
    with pytest.raises(ConfigError):
        parse_config_text("[scenario]\nworld = torus\n")


def test_load_config_presets_resolve():
    for preset in ("fig4_positioning", "fig2_rates_1s", "fig3_rates_5s",
                   "fig5_line_trace"):
        cfg = load_config(preset)
        assert isinstance(cfg, ExperimentConfig)
    with pytest.raises(ConfigError):
        load_config("fig9_dreams")


def test_report_on_empty_dir_fails(tmp_path):
    rc = main(["report", "--out", str(tmp_path)])
    assert rc != 0


def test_simulate_without_estimates_fails(tmp_path, capsys):
    cfg_file = tmp_path / "c.cfg"
    cfg_file.write_text("[scenario]\nduration_s = 2\n[matrix]\nn_seeds = 1\n")
    rc = main(["simulate", "--config", str(cfg_file), "--out", str(tmp_path / "out")])
    assert rc != 0
    assert "estimate" in capsys.readouterr().err


def test_cli_full_tiny_config_runs_and_is_deterministic(tmp_path):
    cfg_file = tmp_path / "tiny.cfg"
    cfg_file.write_text(
        "[scenario]\nduration_s = 6\n"
        "[matrix]\nmodes = doa_toa\nisds_m = 50\nclasses = drone\n"
        "periods_s = 1\nstrategies = baseline, proposed\nn_seeds = 1\n")
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["full", "--config", str(cfg_file), "--out", str(out1), "--jobs", "1"]) == 0
    assert main(["full", "--config", str(cfg_file), "--out", str(out2), "--jobs", "1"]) == 0
    files1 = sorted(p.relative_to(out1) for p in out1.rglob("*.csv"))
    files2 = sorted(p.relative_to(out2) for p in out2.rglob("*.csv"))
    assert files1 == files2 and files1
    for rel in files1:
        assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes()
    assert (out1 / "pos_cdf_doa_toa_50.csv").exists()
    assert (out1 / "rates_1.csv").exists()


def test_cli_env_var_out_dir(tmp_path, monkeypatch):
    cfg_file = tmp_path / "tiny.cfg"
    cfg_file.write_text("[scenario]\nduration_s = 6\n"
                        "[matrix]\nperiods_s =\nstrategies =\nn_seeds = 1\n")
    monkeypatch.setenv("POSBEAM_OUT", str(tmp_path / "envout"))
    assert main(["position", "--config", str(cfg_file)]) == 0
    assert (tmp_path / "envout" / "pos_cdf_doa_toa_50.csv").exists()


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "posbeam.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "position" in proc.stdout
