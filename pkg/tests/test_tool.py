"""I/O formats, config parsing and the CLI verbs end to end."""

import hashlib
import json
import math
import os

import numpy as np
import pytest

from forest_link import cli
from forest_link.config import RunConfig, parse_config_text, stat_targets
from forest_link.errors import ArityError, ConfigError, ParseError
from forest_link.fitting import PathLossSample
from forest_link.ioformats import (
    gps_distance_m, iq_hex_text, pathloss_csv_text, read_iq_hex,
    read_pathloss_csv, read_sweep_csv,
)
from forest_link.ofdm import FrameConfig, build_capture


# ---------------------------------------------------------------------------
# path-loss CSV


def test_pathloss_csv_roundtrip(tmp_path):
    samples = [PathLossSample(10.0, 71.25, None, "larch", "G2G"),
               PathLossSample(55.5, 88.0, 30.0, "birch", "A2G"),
               PathLossSample(300.0, 102.125, 90.0, "other", "A2G")]
    path = tmp_path / "pl.csv"
    path.write_text(pathloss_csv_text(samples))
    back = read_pathloss_csv(str(path))
    assert back == samples


def test_pathloss_csv_three_rows(tmp_path):
    path = tmp_path / "pl.csv"
    path.write_text("dist_m,pl_db\n10,70\n20,75\n40,80\n")
    assert len(read_pathloss_csv(str(path))) == 3


def test_pathloss_csv_zero_distance_names_line(tmp_path):
    path = tmp_path / "pl.csv"
    path.write_text("dist_m,pl_db\n10,70\n0,75\n")
    with pytest.raises(ParseError) as err:
        read_pathloss_csv(str(path))
    assert err.value.line == 3


def test_pathloss_csv_crlf_accepted(tmp_path):
    path = tmp_path / "pl.csv"
    path.write_bytes(b"dist_m,pl_db\r\n10,70\r\n20,75\r\n")
    assert len(read_pathloss_csv(str(path))) == 2


def test_pathloss_csv_empty_rejected(tmp_path):
    path = tmp_path / "pl.csv"
    path.write_text("dist_m,pl_db\n")
    with pytest.raises(ArityError):
        read_pathloss_csv(str(path))


# ---------------------------------------------------------------------------
# I/Q hex captures


def test_iq_hex_specified_values(tmp_path):
    path = tmp_path / "c.hex"
    path.write_text("7FFF 0000\n0000 8000\n")
    samples = read_iq_hex(str(path))
    assert samples[0] == pytest.approx(32767 / 32768 + 0j)
    assert samples[1] == pytest.approx(0 - 1j)


def test_iq_hex_roundtrip_quantization_bound(tmp_path):
    cap = build_capture(FrameConfig()).samples
    path = tmp_path / "cap.hex"
    path.write_text(iq_hex_text(cap))
    back = read_iq_hex(str(path))
    err = np.abs(back - cap)
    assert float(err.max()) <= 2.0 ** -15


def test_iq_hex_bad_token_reports_offset(tmp_path):
    path = tmp_path / "c.hex"
    path.write_text("7FFF 0000\n7FFF XYZ0\n")
    with pytest.raises(ParseError) as err:
        read_iq_hex(str(path))
    assert err.value.byte == 15


def test_iq_hex_odd_tokens(tmp_path):
    path = tmp_path / "c.hex"
    path.write_text("7FFF 0000 1234\n")
    with pytest.raises(ParseError):
        read_iq_hex(str(path))


# ---------------------------------------------------------------------------
# sweep CSV / gps helper


def test_sweep_csv(tmp_path):
    lines = ["azimuth_deg,rssi_dbm"] + [f"{a},-{60 + a / 30}" for a in range(0, 360, 30)]
    path = tmp_path / "s.csv"
    path.write_text("\n".join(lines) + "\n")
    sweep = read_sweep_csv(str(path))
    assert sweep.azimuth_deg.size == 12


def test_gps_distance():
    # one degree of latitude is ~111.2 km on the spherical earth
    d = gps_distance_m(47.0, 120.0, 0.0, 48.0, 120.0, 0.0)
    assert d == pytest.approx(111_195.0, rel=1e-3)
    # altitude hypotenuse
    d = gps_distance_m(47.0, 120.0, 0.0, 47.0, 120.0, 400.0)
    assert d == pytest.approx(400.0, abs=1e-6)


# ---------------------------------------------------------------------------
# config


def test_config_parse_and_validate():
    cfg = parse_config_text(
        "carrier_ghz = 2.0\n# comment\nseed=9\nbounds.ci.n=0.5,9\nfe2r_reading=ratio\n")
    assert cfg.carrier_ghz == 2.0 and cfg.seed == 9
    assert cfg.bounds["ci"]["n"] == (0.5, 9.0)
    assert cfg.fe2r_reading == "ratio"


def test_config_unknown_key_rejected():
    with pytest.raises(ConfigError):
        parse_config_text("carrier_mhz=1400\n")


def test_config_bad_flag_rejected():
    with pytest.raises(ConfigError):
        parse_config_text("fe2r_reading=backwards\n")
    with pytest.raises(ConfigError):
        parse_config_text("bounds.nosuch.n=0,1\n")


def test_config_env_var(tmp_path, monkeypatch):
    path = tmp_path / "cfg"
    path.write_text("seed=123\n")
    monkeypatch.setenv("FOREST_LINK_CONFIG", str(path))
    from forest_link.config import load_config
    assert load_config().seed == 123


def test_stat_presets_cover_both_forests():
    t = stat_targets("larch_g2g")
    assert t.k_db.mu == 19.8 and t.rmsds_ns.mu == 49.5
    t = stat_targets("birch_a2g_30")
    assert t.rmsds_ns.mu == 107.6 and t.elev_deg == 30.0
    with pytest.raises(ConfigError):
        stat_targets("oak_g2g")


# ---------------------------------------------------------------------------
# CLI


def run_cli(*argv):
    return cli.main(list(argv))


def hash_dir(path, exts=(".json", ".csv", ".hex")):
    out = {}
    for name in sorted(os.listdir(path)):
        if name.endswith(exts):
            with open(os.path.join(path, name), "rb") as fh:
                out[name] = hashlib.sha256(fh.read()).hexdigest()
    return out


def test_cli_fit_recovers_ci(tmp_path):
    sim = tmp_path / "sim"
    assert run_cli("simulate", "--env", "larch", "--models", "ci",
                   "--shadow-sigma", "0", "--seed", "5", "--out", str(sim)) == 0
    fit = tmp_path / "fit"
    assert run_cli("fit", "--input", str(sim / "samples.csv"), "--models", "ci",
                   "--seed", "5", "--out", str(fit)) == 0
    tables = json.loads((fit / "fit_results.json").read_text())["tables"]
    row = tables["models"][0]
    assert abs(row["params"]["n"] - 2.6) < 1e-6
    assert row["sigma_db"] < 1e-6


def test_cli_sound_determinism(tmp_path):
    out = tmp_path / "snd"
    assert run_cli("sound", "--taps", "0:1,10:1", "--seed", "7", "--out", str(out)) == 0
    first = hash_dir(out)
    assert run_cli("sound", "--taps", "0:1,10:1", "--seed", "7", "--out", str(out)) == 0
    assert hash_dir(out) == first
    tables = json.loads((out / "sounding.json").read_text())["tables"]
    assert [t["bin"] for t in tables["taps"]] == [0, 10]
    assert tables["zc_peak_bins"] == tables["cfr_peak_bins"]


def test_cli_extract_determinism_and_shape(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run_cli("extract", "--stats-preset", "birch_a2g_30", "--n", "8",
                       "--seed", "3", "--out", str(out)) == 0
    assert hash_dir(a) == hash_dir(b)
    tables = json.loads((a / "extract_results.json").read_text())["tables"]
    assert {"rmsds_ns", "k_db", "n"} <= set(tables)


def test_cli_extract_from_captures(tmp_path):
    snd = tmp_path / "snd"
    assert run_cli("sound", "--taps", "0:1,10:1", "--seed", "2", "--out", str(snd)) == 0
    out = tmp_path / "ext"
    code = run_cli("extract", "--captures", str(snd / "rx.hex"), "--out", str(out))
    assert code == 0
    rows = (out / "realizations.csv").read_text().strip().splitlines()
    assert len(rows) == 2
    ds = float(rows[1].split(",")[1])
    assert ds == pytest.approx(162.76, abs=1.0)


def test_cli_angular(tmp_path):
    lines = ["azimuth_deg,rssi_dbm"] + [f"{a},{-60 - a / 20}" for a in range(0, 360, 30)]
    sweep = tmp_path / "sweep.csv"
    sweep.write_text("\n".join(lines) + "\n")
    out = tmp_path / "ang"
    assert run_cli("angular", "--input", str(sweep), "--out", str(out)) == 0
    tables = json.loads((out / "angular_results.json").read_text())["tables"]
    assert 0.0 <= tables["rms_asa_deg"] <= 180.0
    assert 0.0 <= tables["avg_asa_deg"] < 360.0


def test_cli_validation_error_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("dist_m,pl_db\n0,70\n")
    code = run_cli("fit", "--input", str(bad), "--out", str(tmp_path / "o"))
    assert code == 2
    record = json.loads(capsys.readouterr().err)
    assert record["error"] == "parse" and record["line"] == 2


def test_cli_computation_error_exit_3(tmp_path, capsys):
    lines = ["azimuth_deg,rssi_dbm"] + [f"{a},-60" for a in range(0, 360, 30)]
    sweep = tmp_path / "sweep.csv"
    sweep.write_text("\n".join(lines) + "\n")
    code = run_cli("angular", "--input", str(sweep), "--out", str(tmp_path / "o"))
    assert code == 3
    record = json.loads(capsys.readouterr().err)
    assert record["error"] == "undefined_stat"


def test_cli_report_renders_figures(tmp_path):
    sim = tmp_path / "sim"
    assert run_cli("simulate", "--env", "birch", "--models", "ci,bhf",
                   "--shadow-sigma", "2.6", "--seed", "4", "--out", str(sim)) == 0
    assert run_cli("report", "--dir", str(sim), "--out", str(sim)) == 0
    assert (sim / "pathloss.svg").exists()
    payload = json.loads((sim / "report.json").read_text())
    assert "pathloss.svg" in payload["tables"]["figures"]


def test_cli_report_empty_dir_fails(tmp_path):
    code = run_cli("report", "--dir", str(tmp_path), "--out", str(tmp_path))
    assert code == 2
