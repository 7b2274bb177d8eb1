import numpy as np
import pytest

from gnssio.errors import InvalidConfig
from gnssio.ingest import STARTUP_TRIM_MS, clean_records, load_manifest, load_session, parse_session_file
from gnssio.synth import (
    ContainmentKind,
    RECEIVER_SENSITIVITY_DBHZ,
    SynthConfig,
    generate_containment_files,
    generate_containment_scenario,
    generate_sessions,
    synth_config_from_dict,
)
from gnssio.types import Label, Sublabel


SMALL = dict(n_sessions_per_class=2, session_minutes=2.0)


class TestConfig:
    def test_defaults_valid(self):
        cfg = SynthConfig()
        assert cfg.epochs_per_session == 120

    def test_rejects_bad_dropout(self):
        with pytest.raises(InvalidConfig):
            SynthConfig(indoor_dropout_prob=1.5)

    def test_rejects_unknown_key(self):
        with pytest.raises(InvalidConfig):
            synth_config_from_dict({"no_such_knob": 1})

    def test_from_dict_parses_constellations(self):
        cfg = synth_config_from_dict({"constellations_active": ["GPS", "galileo"]})
        assert len(cfg.constellations_active) == 2


class TestGenerateSessions:
    def test_byte_identical_for_fixed_seed(self, tmp_path):
        cfg = SynthConfig(seed=11, wifi_enabled=True, **SMALL)
        e1 = generate_sessions(cfg, tmp_path / "a")
        e2 = generate_sessions(cfg, tmp_path / "b")
        for x, y in zip(e1, e2):
            assert x.file_path.read_bytes() == y.file_path.read_bytes()
            assert x.wifi_path.read_bytes() == y.wifi_path.read_bytes()
        assert (tmp_path / "a" / "manifest.csv").read_text() == (
            tmp_path / "b" / "manifest.csv"
        ).read_text()

    def test_round_trip_through_ingest(self, tmp_path):
        cfg = SynthConfig(seed=5, **SMALL)
        entries = generate_sessions(cfg, tmp_path)
        for entry in entries:
            records, errors = parse_session_file(entry.file_path)
            assert errors == []
            start = min(r.timestamp_ms for r in records)
            kept, stats = clean_records(records, start)
            # the only removals are the deliberate 20 s warmup prefix
            assert stats.removed_zero_cnr == 0
            assert stats.removed_missing_cnr == 0
            assert stats.removed_missing_frequency == 0
            warmup_rows = sum(1 for r in records if r.timestamp_ms < start + STARTUP_TRIM_MS)
            assert stats.removed_startup == warmup_rows
            assert all(r.cnr_dbhz >= RECEIVER_SENSITIVITY_DBHZ for r in kept)

    def test_manifest_loads_back(self, tmp_path):
        cfg = SynthConfig(seed=5, **SMALL)
        generate_sessions(cfg, tmp_path)
        entries = load_manifest(tmp_path / "manifest.csv")
        assert len(entries) == 4
        labels = [e.label for e in entries]
        assert labels.count(Label.INDOOR) == 2 and labels.count(Label.OUTDOOR) == 2

    def test_expected_epoch_count(self, tmp_path):
        cfg = SynthConfig(seed=5, **SMALL)
        entries = generate_sessions(cfg, tmp_path)
        session = load_session(entries[-1])  # outdoor: no dropout, no missing epochs
        assert len(session.epochs) == cfg.epochs_per_session

    def test_indoor_weaker_than_outdoor(self, tmp_path):
        cfg = SynthConfig(seed=5, **SMALL)
        entries = generate_sessions(cfg, tmp_path)
        sessions = [load_session(e) for e in entries]
        indoor = [s for s in sessions if s.label is Label.INDOOR]
        outdoor = [s for s in sessions if s.label is Label.OUTDOOR]
        mean_cnr_in = np.mean([e.mean_cnr for s in indoor for e in s.epochs])
        mean_cnr_out = np.mean([e.mean_cnr for s in outdoor for e in s.epochs])
        count_in = np.mean([e.satellite_count for s in indoor for e in s.epochs])
        count_out = np.mean([e.satellite_count for s in outdoor for e in s.epochs])
        assert mean_cnr_in < mean_cnr_out
        assert count_in < count_out

    def test_attenuation_monotonically_lowers_indoor_cnr(self, tmp_path):
        means = []
        for atten in (8.0, 16.0):
            cfg = SynthConfig(
                seed=21, n_sessions_per_class=2, session_minutes=10.0,
                indoor_attenuation_mean=atten,
            )
            entries = generate_sessions(cfg, tmp_path / f"a{atten}")
            sessions = [load_session(e) for e in entries if e.label is Label.INDOOR]
            cnrs = [o.cnr_dbhz for s in sessions for ep in s.epochs for o in ep.observations]
            assert len(cnrs) >= 1000
            means.append(np.mean(cnrs))
        assert means[1] < means[0]

    def test_total_dropout_triggers_count_prior(self, tmp_path):
        cfg = SynthConfig(
            seed=2, indoor_dropout_prob=1.0, indoor_attenuation_mean=60.0, **SMALL
        )
        entries = generate_sessions(cfg, tmp_path)
        for entry in entries:
            if entry.label is not Label.INDOOR:
                continue
            session = load_session(entry)
            assert all(e.satellite_count <= 10 for e in session.epochs)

    def test_null_separation_when_attenuation_off(self, tmp_path):
        cfg = SynthConfig(
            seed=3, n_sessions_per_class=2, session_minutes=4.0,
            indoor_attenuation_mean=0.0, indoor_dropout_prob=0.0,
            indoor_visible_sats_mean=30.0, outdoor_visible_sats_mean=30.0,
        )
        entries = generate_sessions(cfg, tmp_path)
        sessions = [load_session(e) for e in entries]
        indoor_cnr = np.mean([e.mean_cnr for s in sessions if s.label is Label.INDOOR for e in s.epochs])
        outdoor_cnr = np.mean([e.mean_cnr for s in sessions if s.label is Label.OUTDOOR for e in s.epochs])
        assert abs(indoor_cnr - outdoor_cnr) < 1.0

    def test_near_window_mix_sets_sublabels(self, tmp_path):
        cfg = SynthConfig(seed=4, near_window_mix=0.5, n_sessions_per_class=4, session_minutes=2.0)
        entries = generate_sessions(cfg, tmp_path)
        sublabels = [e.sublabel for e in entries if e.label is Label.INDOOR]
        assert sublabels.count(Sublabel.NEAR_WINDOW) == 2
        assert sublabels.count(Sublabel.INTERIOR) == 2

    def test_mix_zero_is_plain_interior(self, tmp_path):
        cfg = SynthConfig(seed=4, near_window_mix=0.0, **SMALL)
        entries = generate_sessions(cfg, tmp_path)
        assert all(
            e.sublabel is Sublabel.INTERIOR for e in entries if e.label is Label.INDOOR
        )


class TestContainmentScenarios:
    def test_under_bridge_cnr_below_open_road(self):
        cfg = SynthConfig(seed=6)
        segments = generate_containment_scenario(cfg, ContainmentKind.UNDER_BRIDGE)
        bridge = [e.mean_cnr for s in segments if s.tag == "under_bridge" for e in s.epochs]
        open_road = [e.mean_cnr for s in segments if s.tag == "open_road" for e in s.epochs]
        assert np.mean(bridge) < np.mean(open_road)
        assert all(s.true_label is Label.OUTDOOR for s in segments)

    def test_near_window_above_interior(self):
        cfg = SynthConfig(seed=6)
        segments = generate_containment_scenario(cfg, ContainmentKind.NEAR_WINDOW)
        window = [e.mean_cnr for s in segments if s.tag == "near_window" for e in s.epochs]
        interior = [e.mean_cnr for s in segments if s.tag == "interior" for e in s.epochs]
        assert np.mean(window) > np.mean(interior)
        assert all(s.true_label is Label.INDOOR for s in segments)

    def test_unknown_kind_rejected(self):
        with pytest.raises(InvalidConfig):
            generate_containment_scenario(SynthConfig(), "in_a_cave")

    def test_files_variant_round_trips(self, tmp_path):
        cfg = SynthConfig(seed=6)
        session_path, segments_path = generate_containment_files(
            cfg, ContainmentKind.UNDER_BRIDGE, tmp_path
        )
        records, errors = parse_session_file(session_path)
        assert errors == []
        lines = segments_path.read_text().strip().splitlines()
        assert lines[0] == "tag,start_ms,end_ms"
        assert len(lines) == 7  # 3 open + 3 bridge spans after the warmup
        # scenario spans start after the warmup so cleaning never eats them
        start = min(r.timestamp_ms for r in records)
        first_span_start = int(lines[1].split(",")[1])
        assert first_span_start >= start + STARTUP_TRIM_MS
