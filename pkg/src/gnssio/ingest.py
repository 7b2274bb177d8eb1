"""Parse labeled GNSS session CSV files and a manifest into cleaned, epoch-grouped sessions.

A session file is a UTF-8 CSV with a header row; one row per satellite sighting.
All rows of one file share a single environment label, carried by the manifest.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

from .errors import GnssioError, MissingHeader, RowParseError, UnknownColumn
from .types import (
    Constellation,
    Group,
    Label,
    Sublabel,
    WifiBand,
    WifiEpochFeatures,
)

# Records with a timestamp earlier than session start + this offset are dropped,
# giving the receiver time to stabilize after startup.
STARTUP_TRIM_MS = 20_000


@dataclass(frozen=True)
class CsvSchema:
    """Column names of a session CSV. Defaults match the synthetic generator output."""

    timestamp: str = "timestamp"
    svid: str = "svid"
    constellation: str = "constellation"
    azimuth: str = "azimuth"
    elevation: str = "elevation"
    carrier_frequency: str = "carrier_freq_mhz"
    cnr: str = "cnr_dbhz"
    used_in_fix: str = "used_in_fix"

    def required_columns(self) -> tuple[str, ...]:
        return (
            self.timestamp,
            self.svid,
            self.constellation,
            self.azimuth,
            self.elevation,
            self.carrier_frequency,
            self.cnr,
            self.used_in_fix,
        )


DEFAULT_SCHEMA = CsvSchema()


@dataclass(frozen=True)
class RawRecord:
    """One satellite sighting at one timestamp.

    Azimuth/elevation may be None (missing or out of range in the export); such
    rows are kept for CNR-based processing but excluded from angle features.
    """

    timestamp_ms: int
    svid: int
    constellation: Constellation
    azimuth_deg: Optional[float]
    elevation_deg: Optional[float]
    carrier_frequency_mhz: Optional[float]
    cnr_dbhz: Optional[float]
    used_in_fix: bool


@dataclass(frozen=True)
class SessionManifestEntry:
    file_path: Path
    label: Label
    group: Group
    location_tag: str = ""
    sublabel: Optional[Sublabel] = None
    wifi_path: Optional[Path] = None


@dataclass(frozen=True)
class Epoch:
    """All observations sharing one timestamp, plus derived cross features."""

    timestamp_ms: int
    observations: tuple[RawRecord, ...]
    mean_cnr: float
    satellite_count: int
    wifi: Optional[WifiEpochFeatures] = None

    def with_wifi(self, wifi: Optional[WifiEpochFeatures]) -> "Epoch":
        return replace(self, wifi=wifi)


@dataclass
class CleaningStats:
    removed_startup: int = 0
    removed_zero_cnr: int = 0
    removed_missing_cnr: int = 0
    removed_missing_frequency: int = 0

    @property
    def total_removed(self) -> int:
        return (
            self.removed_startup
            + self.removed_zero_cnr
            + self.removed_missing_cnr
            + self.removed_missing_frequency
        )


@dataclass
class IngestStats:
    n_rows: int = 0
    row_errors: list[RowParseError] = field(default_factory=list)
    cleaning: CleaningStats = field(default_factory=CleaningStats)
    n_epochs: int = 0


@dataclass
class Session:
    entry: SessionManifestEntry
    epochs: list[Epoch]
    start_time_ms: int
    stats: IngestStats = field(default_factory=IngestStats)

    @property
    def label(self) -> Label:
        return self.entry.label

    @property
    def group(self) -> Group:
        return self.entry.group

    @property
    def sublabel(self) -> Optional[Sublabel]:
        return self.entry.sublabel


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "y"):
        return True
    if t in ("0", "false", "no", "n", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_optional_float(text: str) -> Optional[float]:
    t = text.strip()
    if t == "" or t.lower() in ("nan", "none", "null"):
        return None
    return float(t)


def _parse_row(row: dict[str, str], schema: CsvSchema) -> RawRecord:
    timestamp_ms = int(float(row[schema.timestamp]))
    svid = int(float(row[schema.svid]))
    constellation = Constellation.parse(row[schema.constellation])

    azimuth = _parse_optional_float(row[schema.azimuth])
    if azimuth is not None:
        azimuth = azimuth % 360.0

    elevation = _parse_optional_float(row[schema.elevation])
    if elevation is not None and not 0.0 <= elevation <= 90.0:
        elevation = None

    frequency = _parse_optional_float(row[schema.carrier_frequency])
    if frequency is not None and frequency <= 0:
        frequency = None

    cnr = _parse_optional_float(row[schema.cnr])
    if cnr is not None and cnr < 0:
        raise ValueError(f"negative CNR {cnr}")

    used = _parse_bool(row.get(schema.used_in_fix, ""))
    return RawRecord(
        timestamp_ms=timestamp_ms,
        svid=svid,
        constellation=constellation,
        azimuth_deg=azimuth,
        elevation_deg=elevation,
        carrier_frequency_mhz=frequency,
        cnr_dbhz=cnr,
        used_in_fix=used,
    )


def parse_session_file(
    path: Path | str, schema: CsvSchema = DEFAULT_SCHEMA
) -> tuple[list[RawRecord], list[RowParseError]]:
    """Parse one session CSV into RawRecords.

    Malformed rows are collected as RowParseError (with line numbers) instead of
    aborting the file; extra columns (almanac, ephemeris, cellular) are ignored.

    Raises MissingHeader for an empty file and UnknownColumn when a required
    column is absent.
    """
    path = Path(path)
    records: list[RawRecord] = []
    errors: list[RowParseError] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingHeader(f"{path}: file is empty, no header row") from None
        header = [h.strip() for h in header]
        missing = [c for c in schema.required_columns() if c not in header]
        if missing:
            raise UnknownColumn(f"{path}: required column(s) absent: {', '.join(missing)}")
        index = {name: header.index(name) for name in schema.required_columns()}

        for line_number, row in enumerate(reader, start=2):
            if not row or all(cell.strip() == "" for cell in row):
                continue
            if len(row) < len(header):
                errors.append(RowParseError(line_number, f"expected {len(header)} fields, got {len(row)}"))
                continue
            named = {name: row[i] for name, i in index.items()}
            try:
                records.append(_parse_row(named, schema))
            except (ValueError, KeyError) as exc:
                errors.append(RowParseError(line_number, str(exc)))
    return records, errors


def clean_records(
    records: Sequence[RawRecord], session_start_ms: int
) -> tuple[list[RawRecord], CleaningStats]:
    """Drop startup-window rows, zero/missing CNR rows, and missing-frequency rows.

    Cleaning is total (never raises) and idempotent; removal counts come back
    alongside the surviving records. Input ordering by timestamp is preserved
    (records are sorted first if needed).
    """
    ordered = list(records)
    if any(ordered[i].timestamp_ms > ordered[i + 1].timestamp_ms for i in range(len(ordered) - 1)):
        ordered.sort(key=lambda r: r.timestamp_ms)

    stats = CleaningStats()
    kept: list[RawRecord] = []
    cutoff = session_start_ms + STARTUP_TRIM_MS
    for rec in ordered:
        if rec.timestamp_ms < cutoff:
            stats.removed_startup += 1
        elif rec.cnr_dbhz is None:
            stats.removed_missing_cnr += 1
        elif rec.cnr_dbhz == 0.0:
            stats.removed_zero_cnr += 1
        elif rec.carrier_frequency_mhz is None:
            stats.removed_missing_frequency += 1
        else:
            kept.append(rec)
    return kept, stats


def group_into_epochs(records: Sequence[RawRecord]) -> list[Epoch]:
    """Group cleaned records into one Epoch per distinct timestamp.

    Derives the two cross features shared by every observation of the epoch:
    satellite_count and the linear arithmetic mean of CNR.
    """
    ordered = sorted(records, key=lambda r: r.timestamp_ms)
    epochs: list[Epoch] = []
    i = 0
    while i < len(ordered):
        j = i
        while j < len(ordered) and ordered[j].timestamp_ms == ordered[i].timestamp_ms:
            j += 1
        obs = tuple(ordered[i:j])
        mean_cnr = sum(o.cnr_dbhz for o in obs) / len(obs)
        epochs.append(
            Epoch(
                timestamp_ms=ordered[i].timestamp_ms,
                observations=obs,
                mean_cnr=mean_cnr,
                satellite_count=len(obs),
            )
        )
        i = j
    return epochs


def load_session(
    entry: SessionManifestEntry,
    schema: CsvSchema = DEFAULT_SCHEMA,
    start_time_ms: Optional[int] = None,
) -> Session:
    """Parse, clean, and epoch-group one manifest entry.

    Session start defaults to the first row's timestamp; pass start_time_ms to
    override when an external start marker is available.
    """
    records, row_errors = parse_session_file(entry.file_path, schema)
    stats = IngestStats(n_rows=len(records) + len(row_errors), row_errors=row_errors)
    if not records:
        return Session(entry=entry, epochs=[], start_time_ms=start_time_ms or 0, stats=stats)

    start = start_time_ms if start_time_ms is not None else min(r.timestamp_ms for r in records)
    cleaned, stats.cleaning = clean_records(records, start)
    epochs = group_into_epochs(cleaned)
    stats.n_epochs = len(epochs)
    return Session(entry=entry, epochs=epochs, start_time_ms=start, stats=stats)


MANIFEST_COLUMNS = ("path", "label", "group", "location_tag", "sublabel", "wifi_path")


def load_manifest(path: Path | str) -> list[SessionManifestEntry]:
    """Read a manifest CSV listing (path, label, group, location_tag, sublabel[, wifi_path]).

    Paths are resolved relative to the manifest file. Every referenced session
    file must exist.
    """
    path = Path(path)
    base = path.parent
    entries: list[SessionManifestEntry] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise MissingHeader(f"{path}: manifest is empty")
        for col in MANIFEST_COLUMNS[:5]:
            if col not in reader.fieldnames:
                raise UnknownColumn(f"{path}: manifest lacks column {col!r}")
        for i, row in enumerate(reader, start=2):
            file_path = base / row["path"]
            if not file_path.exists():
                raise GnssioError(f"{path} line {i}: session file not found: {file_path}")
            wifi_raw = (row.get("wifi_path") or "").strip()
            wifi_path = base / wifi_raw if wifi_raw else None
            if wifi_path is not None and not wifi_path.exists():
                raise GnssioError(f"{path} line {i}: wifi file not found: {wifi_path}")
            entries.append(
                SessionManifestEntry(
                    file_path=file_path,
                    label=Label.parse(row["label"]),
                    group=Group.parse(row["group"]),
                    location_tag=(row.get("location_tag") or "").strip(),
                    sublabel=Sublabel.parse(row.get("sublabel") or ""),
                    wifi_path=wifi_path,
                )
            )
    return entries


def write_manifest(entries: Sequence[SessionManifestEntry], path: Path | str) -> None:
    """Write a manifest CSV with paths stored relative to the manifest location."""
    path = Path(path)
    base = path.parent
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for e in entries:
            writer.writerow(
                [
                    e.file_path.relative_to(base) if e.file_path.is_relative_to(base) else e.file_path,
                    e.label.value,
                    e.group.value,
                    e.location_tag,
                    e.sublabel.value if e.sublabel else "",
                    (e.wifi_path.relative_to(base) if e.wifi_path.is_relative_to(base) else e.wifi_path)
                    if e.wifi_path
                    else "",
                ]
            )


@dataclass(frozen=True)
class WifiScan:
    """One access-point sighting from a Wi-Fi scan."""

    timestamp_ms: int
    band: WifiBand
    rssi_dbm: float


def band_from_frequency(frequency_mhz: float) -> WifiBand:
    # 2.4 GHz channels sit below 3000 MHz; everything above is treated as 5 GHz.
    return WifiBand.GHZ_24 if frequency_mhz < 3000.0 else WifiBand.GHZ_5


def load_wifi_scans(path: Path | str) -> dict[int, list[WifiScan]]:
    """Read a Wi-Fi scan CSV (timestamp, frequency_mhz, rssi_dbm) grouped by timestamp."""
    path = Path(path)
    scans: dict[int, list[WifiScan]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise MissingHeader(f"{path}: file is empty, no header row")
        for col in ("timestamp", "frequency_mhz", "rssi_dbm"):
            if col not in reader.fieldnames:
                raise UnknownColumn(f"{path}: required column(s) absent: {col}")
        for row in reader:
            ts = int(float(row["timestamp"]))
            scan = WifiScan(
                timestamp_ms=ts,
                band=band_from_frequency(float(row["frequency_mhz"])),
                rssi_dbm=float(row["rssi_dbm"]),
            )
            scans.setdefault(ts, []).append(scan)
    return scans
