"""Shared builders for hand-crafted records, epochs, and sessions."""
from pathlib import Path

import pytest

from gnssio.ingest import (
    Epoch,
    IngestStats,
    RawRecord,
    Session,
    SessionManifestEntry,
    group_into_epochs,
)
from gnssio.types import Constellation, Group, Label


def make_record(
    ts=1_000_000_000_000,
    svid=1,
    constellation=Constellation.GPS,
    az=10.0,
    el=45.0,
    freq=1575.42,
    cnr=30.0,
    used=False,
) -> RawRecord:
    return RawRecord(
        timestamp_ms=ts,
        svid=svid,
        constellation=constellation,
        azimuth_deg=az,
        elevation_deg=el,
        carrier_frequency_mhz=freq,
        cnr_dbhz=cnr,
        used_in_fix=used,
    )


def make_epoch(cnrs, ts=1_000_000_000_000, constellation=Constellation.GPS, freq=1575.42) -> Epoch:
    records = [
        make_record(ts=ts, svid=i + 1, constellation=constellation, freq=freq, cnr=c)
        for i, c in enumerate(cnrs)
    ]
    return group_into_epochs(records)[0]


def make_session(label, epochs, group=Group.A, sublabel=None, path="mem.csv") -> Session:
    entry = SessionManifestEntry(
        file_path=Path(path), label=label, group=group, location_tag="test", sublabel=sublabel
    )
    start = epochs[0].timestamp_ms if epochs else 0
    return Session(entry=entry, epochs=list(epochs), start_time_ms=start, stats=IngestStats())


def session_from_records(label, records, group=Group.A, sublabel=None) -> Session:
    return make_session(label, group_into_epochs(records), group=group, sublabel=sublabel)


@pytest.fixture
def indoor_label():
    return Label.INDOOR
