"""Scenario configuration, the end-to-end pipeline, and CSV reports."""

import csv

import numpy as np
import pytest

from fhcodec.channel import randsvd_channel, save_channel
from fhcodec.exceptions import ConfigError
from fhcodec.harness import (
    ChannelSpec,
    PreparedScenario,
    RunReport,
    ScenarioConfig,
    compression_table,
    make_channel,
    nominal_quantizer_error,
    report_to_csv_text,
    run_scenario,
    sweep_condition_numbers,
    write_report,
)
from fhcodec.codec import lloyd_max_codebook


def small_config(**overrides):
    base = dict(m_antennas=16, n_user=2, n_rb=4, n12=12, n_beam=8,
                modulation_order=16, seed=5,
                channel={"kind": "clustered", "n_clusters": 4,
                         "angle_spread_deg": 4.0})
    base.update(overrides)
    return ScenarioConfig.from_dict(base)


class TestScenarioConfig:
    def test_defaults_round_trip(self):
        cfg = ScenarioConfig()
        again = ScenarioConfig.from_dict(cfg.to_dict())
        assert again == cfg

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            ScenarioConfig.from_dict({"m_antennas": 8, "snr": 20})

    def test_unknown_channel_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown channel keys"):
            ScenarioConfig.from_dict({"channel": {"kind": "randsvd", "cond": 10}})

    @pytest.mark.parametrize("field,value", [
        ("n12", 13),
        ("beamspace", "hadamard"),
        ("modulation_order", 8),
        ("n_beam", 100),
        ("b_exp", 0),
        ("bits", 11),
        ("n_user", 200),
    ])
    def test_invalid_values_rejected(self, field, value):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({field: value})

    def test_channel_kind_validated(self):
        with pytest.raises(ConfigError, match="channel kind"):
            ScenarioConfig.from_dict({"channel": {"kind": "raytrace"}})

    def test_file_kind_needs_path(self):
        with pytest.raises(ConfigError, match="path"):
            ChannelSpec(kind="file")

    def test_replace(self):
        cfg = ScenarioConfig()
        other = cfg.replace(n_beam=32)
        assert other.n_beam == 32
        assert cfg.n_beam == 16

    def test_n_sc(self):
        assert ScenarioConfig().n_sc == 192


class TestMakeChannel:
    def test_randsvd_kind(self):
        cfg = small_config(channel={"kind": "randsvd", "cond_target": 10.0})
        ch = make_channel(cfg, seed=1)
        assert ch.matrices.shape == (4, 16, 2)

    def test_file_kind_dimension_check(self, tmp_path):
        path = tmp_path / "chan.fhch"
        save_channel(randsvd_channel(16, 2, 5.0, 4, seed=1), path)
        cfg = small_config(channel={"kind": "file", "path": str(path)})
        assert make_channel(cfg, seed=0).matrices.shape == (4, 16, 2)
        bad = small_config(n_rb=2, n12=24,
                           channel={"kind": "file", "path": str(path)})
        with pytest.raises(ConfigError, match="dimensions"):
            make_channel(bad, seed=0)


class TestPreparedScenario:
    def test_detector_matches_clean_symbols_without_noise(self):
        cfg = small_config(snr_db=None, bits=10)
        sc = PreparedScenario(cfg)
        # well-conditioned clustered channel, lossless link: detection is exact
        assert np.linalg.norm(sc.x_clean - sc.x_grid) <= 1e-8 * np.linalg.norm(sc.x_grid)

    def test_near_lossless_pipeline(self):
        # no noise, 10-bit mantissas, benign conditioning: total EVM below 0.1%
        cfg = ScenarioConfig.from_dict(dict(
            m_antennas=64, n_user=2, n_rb=4, n_beam=64, beamspace="identity",
            snr_db=None, bits=10, modulation_order=256, seed=2,
            channel={"kind": "randsvd", "cond_target": 1.0}))
        report = run_scenario(cfg)
        row = dict(zip(report.columns, report.rows[0]))
        assert row["evm_total_percent"] < 0.1

    def test_profile_independent_state_is_reused(self):
        cfg = small_config()
        sc = PreparedScenario(cfg)
        first = sc.evaluate_evm(np.full(cfg.n_beam, 6))
        second = sc.evaluate_evm(np.full(cfg.n_beam, 6))
        assert first == second

    def test_compression_error_decreases_with_bits(self):
        sc = PreparedScenario(small_config())
        coarse = sc.compression_error(np.full(8, 3))
        fine = sc.compression_error(np.full(8, 9))
        assert fine < coarse

    def test_stage_tagged_diagnostics(self):
        # rank-deficient channel at zero noise fails inside detection
        from fhcodec.channel import ChannelRealization, save_channel
        from fhcodec.exceptions import NotPositiveDefiniteError
        import tempfile, os
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "rank1.fhch")
            save_channel(ChannelRealization(np.ones((1, 4, 2), dtype=complex)), path)
            cfg = ScenarioConfig.from_dict(dict(
                m_antennas=4, n_user=2, n_rb=1, n12=12, n_beam=4,
                beamspace="identity", snr_db=None, modulation_order=4,
                channel={"kind": "file", "path": path}))
            with pytest.raises(NotPositiveDefiniteError, match=r"\[stage: detection\]"):
                PreparedScenario(cfg)


class TestRunScenario:
    def test_deterministic(self):
        cfg = small_config()
        a = run_scenario(cfg)
        b = run_scenario(cfg)
        assert a.rows == b.rows

    def test_reports_every_metric(self):
        report = run_scenario(small_config())
        row = dict(zip(report.columns, report.rows[0]))
        assert row["cond_f"] > 0
        assert 0 < row["delta_y"] < 1
        assert row["measured_error"] > 0
        assert row["predicted_error"] > 0
        assert row["evm_total_percent"] > 0
        assert row["compression_ratio"] > 1
        assert row["mean_bits"] == 6.0
        assert report.config["m_antennas"] == 16

    def test_seed_override(self):
        cfg = small_config()
        a = run_scenario(cfg, seed=9)
        b = run_scenario(cfg, seed=10)
        assert a.rows != b.rows


class TestSweep:
    def test_shape_and_ratio_column(self):
        cfg = small_config()
        report = sweep_condition_numbers(cfg, [10.0, 100.0], [4, 6], n_seeds=2)
        assert len(report.rows) == 2 * 2 * 2
        for row in report.rows:
            entry = dict(zip(report.columns, row))
            assert entry["ratio"] == pytest.approx(
                entry["measured_error"] / entry["predicted_error"], rel=1e-12)

    def test_forced_antenna_domain(self):
        cfg = small_config()
        report = sweep_condition_numbers(cfg, [10.0], [6], n_seeds=1)
        assert report.config["beamspace"] == "identity"
        assert report.config["n_beam"] == cfg.m_antennas
        assert report.config["snr_db"] is None

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            sweep_condition_numbers(small_config(), [], [6], n_seeds=1)


class TestCompressionTable:
    def test_small_table(self):
        cfg = small_config(seed=3)
        report = compression_table(cfg, beam_counts=(4,), budget=40,
                                   n_train_scenarios=2)
        modes = [(row[0], row[1], row[2]) for row in report.rows]
        assert (4, "dft", "online") in modes
        assert (4, "svd", "offline") in modes
        assert (4, "dft", "fixed") in modes
        for row in report.rows:
            entry = dict(zip(report.columns, row))
            if entry["mode"] == "fixed":
                assert entry["mean_bits"] == 6.0
            else:
                assert entry["compression_ratio"] > 0

    def test_single_user_enforced(self):
        report = compression_table(small_config(), beam_counts=(4,), budget=40,
                                   n_train_scenarios=2)
        assert report.config["n_user"] == 1

    def test_table_direction_sixteen_beams(self):
        # trained cells compress harder than fixed length at <6 mean bits, and
        # per-scenario (online) training is at least as good as offline
        cfg = ScenarioConfig.from_dict(dict(
            m_antennas=64, n_user=1, n_rb=16, seed=11,
            channel={"kind": "clustered", "n_clusters": 3,
                     "angle_spread_deg": 5.0}))
        report = compression_table(cfg, beam_counts=(16,), budget=240,
                                   n_train_scenarios=4)
        table = {(r[0], r[1], r[2]): dict(zip(report.columns, r))
                 for r in report.rows}
        for kind in ("dft", "svd"):
            online = table[(16, kind, "online")]
            offline = table[(16, kind, "offline")]
            fixed = table[(16, kind, "fixed")]
            assert online["mean_bits"] < 6.0
            assert offline["mean_bits"] < 6.0
            assert online["compression_ratio"] >= offline["compression_ratio"]
            assert offline["compression_ratio"] > fixed["compression_ratio"]


class TestNominalQuantizerError:
    def test_uniform_profile(self):
        want = np.sqrt(lloyd_max_codebook(6).mse)
        assert nominal_quantizer_error([6, 6, 6]) == pytest.approx(want, rel=1e-12)

    def test_mixed_profile_is_rms(self):
        mses = [lloyd_max_codebook(b).mse for b in (2, 8)]
        assert nominal_quantizer_error([2, 8]) == pytest.approx(
            np.sqrt(np.mean(mses)), rel=1e-12)


class TestReports:
    def test_empty_report_is_header_only(self, tmp_path):
        report = RunReport(config={}, columns=["a", "b"], rows=[])
        path = tmp_path / "empty.csv"
        write_report(report, path)
        assert path.read_text() == "a,b\n"

    def test_round_trip_parse(self, tmp_path):
        report = RunReport(config={}, columns=["name", "value"],
                           rows=[("x", 0.123456789), ("y", 42)])
        path = tmp_path / "report.csv"
        write_report(report, path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["name", "value"]
        assert rows[1] == ["x", "0.123457"]  # six significant digits
        assert rows[2] == ["y", "42"]

    def test_csv_text_deterministic(self):
        report = RunReport(config={}, columns=["v"], rows=[(1.0 / 3.0,)])
        assert report_to_csv_text(report) == report_to_csv_text(report)
        assert report_to_csv_text(report) == "v\n0.333333\n"
