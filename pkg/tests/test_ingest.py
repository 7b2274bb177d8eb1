import pytest
from hypothesis import given, strategies as st

from gnssio.errors import GnssioError, MissingHeader, UnknownColumn
from gnssio.ingest import (
    STARTUP_TRIM_MS,
    clean_records,
    group_into_epochs,
    load_manifest,
    parse_session_file,
    write_manifest,
    SessionManifestEntry,
)
from gnssio.types import Constellation, Group, Label, Sublabel

from conftest import make_record

HEADER = "timestamp,svid,constellation,azimuth,elevation,carrier_freq_mhz,cnr_dbhz,used_in_fix"


def write_csv(tmp_path, rows, header=HEADER, name="session.csv"):
    path = tmp_path / name
    path.write_text("\n".join([header] + rows) + "\n", encoding="utf-8")
    return path


class TestParse:
    def test_well_formed_rows(self, tmp_path):
        path = write_csv(
            tmp_path,
            [
                "1000,5,GPS,10.0,45.0,1575.42,30.0,true",
                "1000,7,GLONASS,200.0,60.0,1602.00,35.5,false",
                "6000,5,GPS,10.0,45.0,1575.42,31.0,true",
            ],
        )
        records, errors = parse_session_file(path)
        assert len(records) == 3
        assert errors == []
        assert records[0].svid == 5
        assert records[1].constellation is Constellation.GLONASS
        assert records[2].cnr_dbhz == 31.0

    def test_constellation_case_insensitive(self, tmp_path):
        path = write_csv(tmp_path, ["1000,26,BEIDOU,10.0,45.0,1575.42,30.0,true"])
        records, _ = parse_session_file(path)
        assert records[0].constellation is Constellation.BEIDOU

    def test_unknown_constellation_becomes_other(self, tmp_path):
        path = write_csv(tmp_path, ["1000,3,WEIRD_SYSTEM,10.0,45.0,1575.42,30.0,true"])
        records, errors = parse_session_file(path)
        assert errors == []
        assert records[0].constellation is Constellation.OTHER

    def test_bad_cnr_isolated_to_its_row(self, tmp_path):
        path = write_csv(
            tmp_path,
            [
                "1000,5,GPS,10.0,45.0,1575.42,30.0,true",
                "1000,6,GPS,10.0,45.0,1575.42,not_a_number,true",
                "1000,7,GPS,10.0,45.0,1575.42,32.0,true",
            ],
        )
        records, errors = parse_session_file(path)
        assert len(records) == 2
        assert len(errors) == 1
        assert errors[0].line_number == 3

    def test_missing_values_become_none(self, tmp_path):
        path = write_csv(tmp_path, ["1000,5,GPS,,,,,"])
        records, errors = parse_session_file(path)
        assert errors == []
        rec = records[0]
        assert rec.azimuth_deg is None
        assert rec.elevation_deg is None
        assert rec.carrier_frequency_mhz is None
        assert rec.cnr_dbhz is None

    def test_out_of_range_elevation_dropped_to_none(self, tmp_path):
        path = write_csv(tmp_path, ["1000,5,GPS,365.0,95.0,1575.42,30.0,true"])
        records, _ = parse_session_file(path)
        assert records[0].elevation_deg is None
        assert records[0].azimuth_deg == pytest.approx(5.0)

    def test_extra_columns_ignored(self, tmp_path):
        path = write_csv(
            tmp_path,
            ["1000,5,GPS,10.0,45.0,1575.42,30.0,true,1,0"],
            header=HEADER + ",has_almanac,has_ephemeris",
        )
        records, errors = parse_session_file(path)
        assert len(records) == 1 and errors == []

    def test_empty_file_missing_header(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("", encoding="utf-8")
        with pytest.raises(MissingHeader):
            parse_session_file(path)

    def test_required_column_absent(self, tmp_path):
        path = write_csv(tmp_path, ["1000,5,GPS,10.0,45.0,30.0,true"],
                         header="timestamp,svid,constellation,azimuth,elevation,cnr_dbhz,used_in_fix")
        with pytest.raises(UnknownColumn):
            parse_session_file(path)


class TestClean:
    def test_zero_cnr_removed(self):
        start = 0
        records = [make_record(ts=STARTUP_TRIM_MS + 1000, cnr=0.0)]
        kept, stats = clean_records(records, start)
        assert kept == []
        assert stats.removed_zero_cnr == 1

    def test_startup_window_removed(self):
        start = 1_000_000
        records = [make_record(ts=start + 15_000, cnr=35.0)]
        kept, stats = clean_records(records, start)
        assert kept == []
        assert stats.removed_startup == 1

    def test_good_record_retained(self):
        start = 1_000_000
        rec = make_record(ts=start + 60_000, cnr=35.0)
        kept, stats = clean_records([rec], start)
        assert kept == [rec]
        assert stats.total_removed == 0

    def test_missing_cnr_and_frequency_removed(self):
        start = 0
        t = STARTUP_TRIM_MS + 1000
        records = [
            make_record(ts=t, cnr=None),
            make_record(ts=t, freq=None),
            make_record(ts=t),
        ]
        kept, stats = clean_records(records, start)
        assert len(kept) == 1
        assert stats.removed_missing_cnr == 1
        assert stats.removed_missing_frequency == 1

    def test_boundary_timestamp_survives(self):
        start = 500
        rec = make_record(ts=start + STARTUP_TRIM_MS)
        kept, _ = clean_records([rec], start)
        assert kept == [rec]

    def test_ordering_preserved_and_sorted(self):
        start = 0
        t = STARTUP_TRIM_MS
        records = [make_record(ts=t + 10_000, svid=2), make_record(ts=t, svid=1)]
        kept, _ = clean_records(records, start)
        assert [r.svid for r in kept] == [1, 2]

    @given(
        st.lists(
            st.tuples(
                st.integers(min_value=0, max_value=100_000),
                st.one_of(st.none(), st.just(0.0), st.floats(10.0, 50.0)),
                st.one_of(st.none(), st.just(1575.42)),
            ),
            max_size=40,
        )
    )
    def test_idempotent_and_counts(self, rows):
        records = [make_record(ts=ts, cnr=cnr, freq=freq) for ts, cnr, freq in rows]
        once, stats = clean_records(records, 0)
        twice, stats2 = clean_records(once, 0)
        assert twice == once
        assert stats2.total_removed == 0
        assert stats.total_removed == len(records) - len(once)
        for rec in once:
            assert rec.cnr_dbhz not in (None, 0.0)
            assert rec.carrier_frequency_mhz is not None
            assert rec.timestamp_ms >= STARTUP_TRIM_MS


class TestGroup:
    def test_two_timestamps(self):
        t1, t2 = 50_000, 55_000
        records = [make_record(ts=t1, svid=1), make_record(ts=t1, svid=2), make_record(ts=t2, svid=3)]
        epochs = group_into_epochs(records)
        assert [e.satellite_count for e in epochs] == [2, 1]
        assert [e.timestamp_ms for e in epochs] == [t1, t2]

    def test_mean_cnr(self):
        records = [make_record(svid=1, cnr=20.0), make_record(svid=2, cnr=30.0)]
        (epoch,) = group_into_epochs(records)
        assert epoch.mean_cnr == pytest.approx(25.0)

    def test_count_reflects_cleaned_records(self):
        start = 0
        t = STARTUP_TRIM_MS + 5000
        records = [make_record(ts=t, svid=i) for i in range(1, 6)]
        records[2] = make_record(ts=t, svid=3, cnr=0.0)  # cleaned away upstream
        kept, _ = clean_records(records, start)
        (epoch,) = group_into_epochs(kept)
        assert epoch.satellite_count == 4

    def test_empty_input_gives_empty_list(self):
        assert group_into_epochs([]) == []

    @given(st.lists(st.integers(0, 20), min_size=1, max_size=60))
    def test_partition_property(self, ts_choices):
        records = [make_record(ts=t * 5000, svid=i) for i, t in enumerate(ts_choices)]
        epochs = group_into_epochs(records)
        assert sum(e.satellite_count for e in epochs) == len(records)
        stamps = [e.timestamp_ms for e in epochs]
        assert stamps == sorted(set(stamps))


class TestManifest:
    def test_round_trip(self, tmp_path):
        session = write_csv(tmp_path, ["1000,5,GPS,10.0,45.0,1575.42,30.0,true"])
        entries = [
            SessionManifestEntry(
                file_path=session,
                label=Label.INDOOR,
                group=Group.A,
                location_tag="lab",
                sublabel=Sublabel.INTERIOR,
            )
        ]
        manifest = tmp_path / "manifest.csv"
        write_manifest(entries, manifest)
        loaded = load_manifest(manifest)
        assert len(loaded) == 1
        assert loaded[0].label is Label.INDOOR
        assert loaded[0].group is Group.A
        assert loaded[0].sublabel is Sublabel.INTERIOR
        assert loaded[0].file_path == session

    def test_missing_file_rejected(self, tmp_path):
        manifest = tmp_path / "manifest.csv"
        manifest.write_text(
            "path,label,group,location_tag,sublabel\nnope.csv,indoor,A,x,\n", encoding="utf-8"
        )
        with pytest.raises(GnssioError):
            load_manifest(manifest)
