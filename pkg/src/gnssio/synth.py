"""Labeled synthetic GNSS (and optional Wi-Fi) session generator.

Gives the pipeline a desk-scale benchmark with known ground truth: indoor
epochs see fewer satellites and attenuated CNR, outdoor epochs see many strong
satellites, and containment scenarios (under-bridge, near-window) deliberately
blur the line. Output files use the exact ingest CSV schema, and a fixed seed
produces byte-identical files.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidConfig
from .ingest import (
    DEFAULT_SCHEMA,
    Epoch,
    RawRecord,
    SessionManifestEntry,
    group_into_epochs,
    write_manifest,
)
from .types import Constellation, Group, Label, Sublabel

# Observations below this CNR never reach the receiver's tracking output.
RECEIVER_SENSITIVITY_DBHZ = 10.0

# Highest SVID emitted per constellation; a small universe keeps satellite keys
# recurring across sessions so per-key thresholds get trained.
MAX_SVID = 12

CARRIER_MHZ = {
    Constellation.GPS: 1575.42,
    Constellation.GLONASS: 1602.0,
    Constellation.GALILEO: 1575.42,
    Constellation.BEIDOU: 1575.42,
    Constellation.QZSS: 1575.42,
    Constellation.SBAS: 1575.42,
    Constellation.IRNSS: 1176.45,
    Constellation.OTHER: 1575.42,
}

_SESSION_EPOCH_BASE_MS = 1_735_000_000_000
_SESSION_SPACING_MS = 86_400_000

# Near-window regime: this fraction of the interior attenuation and dropout.
_NEAR_WINDOW_FACTOR = 0.25
# Under-bridge regime: extra attenuation on top of the indoor mean, and a
# heavier per-satellite dropout.
_BRIDGE_EXTRA_ATTENUATION_DB = 4.0
_BRIDGE_DROPOUT_PROB = 0.5

_WIFI_FREQ_24_MHZ = 2437.0
_WIFI_FREQ_5_MHZ = 5240.0
# (mean AP count 2.4 GHz, mean AP count 5 GHz, mean RSSI dBm, RSSI std)
_WIFI_INDOOR = (8.0, 6.0, -52.0, 6.0)
_WIFI_OUTDOOR = (2.0, 1.0, -80.0, 5.0)


@dataclass(frozen=True)
class SynthConfig:
    n_sessions_per_class: int = 4
    session_minutes: float = 10.0
    epoch_period_s: int = 5
    constellations_active: tuple[Constellation, ...] = (
        Constellation.GPS,
        Constellation.GLONASS,
        Constellation.GALILEO,
        Constellation.BEIDOU,
    )
    # CNR model: base + elevation_gain * sin(elevation) - attenuation + noise.
    base_cnr_at_zenith: float = 24.0
    elevation_gain: float = 9.0
    indoor_attenuation_mean: float = 12.0
    indoor_attenuation_std: float = 4.0
    indoor_dropout_prob: float = 0.35
    outdoor_visible_sats_mean: float = 30.0
    indoor_visible_sats_mean: float = 18.0
    near_window_mix: float = 0.0
    noise_std: float = 2.0
    seed: int = 0
    wifi_enabled: bool = False

    def __post_init__(self):
        if self.n_sessions_per_class < 1:
            raise InvalidConfig("n_sessions_per_class must be >= 1")
        if self.session_minutes <= 0:
            raise InvalidConfig("session_minutes must be positive")
        if self.epoch_period_s <= 0:
            raise InvalidConfig("epoch_period_s must be positive")
        if not self.constellations_active:
            raise InvalidConfig("constellations_active must not be empty")
        if not 0.0 <= self.indoor_dropout_prob <= 1.0:
            raise InvalidConfig("indoor_dropout_prob must be in [0, 1]")
        if not 0.0 <= self.near_window_mix <= 1.0:
            raise InvalidConfig("near_window_mix must be in [0, 1]")
        if self.indoor_attenuation_mean < 0 or self.indoor_attenuation_std < 0:
            raise InvalidConfig("attenuation parameters must be nonnegative")
        if self.noise_std < 0:
            raise InvalidConfig("noise_std must be nonnegative")
        if self.outdoor_visible_sats_mean <= 0 or self.indoor_visible_sats_mean <= 0:
            raise InvalidConfig("visible satellite means must be positive")

    @property
    def epochs_per_session(self) -> int:
        return int(self.session_minutes * 60 // self.epoch_period_s)


def synth_config_from_dict(overrides: dict) -> SynthConfig:
    """Build a SynthConfig from a plain dict (e.g. parsed JSON), validating keys."""
    known = {f.name for f in fields(SynthConfig)}
    unknown = set(overrides) - known
    if unknown:
        raise InvalidConfig(f"unknown synth config key(s): {', '.join(sorted(unknown))}")
    kwargs = dict(overrides)
    if "constellations_active" in kwargs:
        kwargs["constellations_active"] = tuple(
            Constellation.parse(str(c)) for c in kwargs["constellations_active"]
        )
    return SynthConfig(**kwargs)


@dataclass(frozen=True)
class _Satellite:
    constellation: Constellation
    svid: int
    carrier_mhz: float
    azimuth_deg: float
    elevation_deg: float


@dataclass(frozen=True)
class _Regime:
    """Signal environment for a stretch of epochs."""

    attenuation_mean: float
    attenuation_std: float
    dropout_prob: float


_OUTDOOR_REGIME = _Regime(0.0, 0.0, 0.0)


def _indoor_regime(cfg: SynthConfig, factor: float = 1.0) -> _Regime:
    return _Regime(
        attenuation_mean=cfg.indoor_attenuation_mean * factor,
        attenuation_std=cfg.indoor_attenuation_std,
        dropout_prob=cfg.indoor_dropout_prob * factor,
    )


def _bridge_regime(cfg: SynthConfig) -> _Regime:
    return _Regime(
        attenuation_mean=cfg.indoor_attenuation_mean + _BRIDGE_EXTRA_ATTENUATION_DB,
        attenuation_std=cfg.indoor_attenuation_std,
        dropout_prob=_BRIDGE_DROPOUT_PROB,
    )


def _draw_sky(rng: np.random.Generator, cfg: SynthConfig, visible_mean: float) -> list[_Satellite]:
    """Static satellite geometry for one session: positions do not move at desk scale."""
    universe = [
        (con, svid)
        for con in cfg.constellations_active
        for svid in range(1, MAX_SVID + 1)
    ]
    n_visible = int(np.clip(rng.poisson(visible_mean), 1, len(universe)))
    chosen = rng.choice(len(universe), size=n_visible, replace=False)
    sats = []
    for idx in np.sort(chosen):
        con, svid = universe[int(idx)]
        sats.append(
            _Satellite(
                constellation=con,
                svid=svid,
                carrier_mhz=CARRIER_MHZ[con],
                azimuth_deg=round(float(rng.uniform(0.0, 360.0)), 1) % 360.0,
                elevation_deg=round(float(rng.uniform(5.0, 90.0)), 1),
            )
        )
    return sats


def _epoch_records(
    rng: np.random.Generator,
    cfg: SynthConfig,
    sats: Sequence[_Satellite],
    regime: _Regime,
    timestamp_ms: int,
) -> list[RawRecord]:
    records = []
    for sat in sats:
        if regime.dropout_prob > 0.0 and rng.random() < regime.dropout_prob:
            continue
        attenuation = 0.0
        if regime.attenuation_mean > 0.0:
            attenuation = max(0.0, rng.normal(regime.attenuation_mean, regime.attenuation_std))
        cnr = (
            cfg.base_cnr_at_zenith
            + cfg.elevation_gain * math.sin(math.radians(sat.elevation_deg))
            - attenuation
            + rng.normal(0.0, cfg.noise_std)
        )
        if cnr < RECEIVER_SENSITIVITY_DBHZ:
            continue
        cnr = round(cnr, 1)
        records.append(
            RawRecord(
                timestamp_ms=timestamp_ms,
                svid=sat.svid,
                constellation=sat.constellation,
                azimuth_deg=sat.azimuth_deg,
                elevation_deg=sat.elevation_deg,
                carrier_frequency_mhz=sat.carrier_mhz,
                cnr_dbhz=cnr,
                used_in_fix=cnr > 28.0,
            )
        )
    return records


def _wifi_rows(
    rng: np.random.Generator, label: Label, timestamp_ms: int
) -> list[tuple[int, float, float]]:
    mean24, mean5, rssi_mean, rssi_std = _WIFI_INDOOR if label is Label.INDOOR else _WIFI_OUTDOOR
    rows = []
    for _ in range(int(rng.poisson(mean24))):
        rows.append((timestamp_ms, _WIFI_FREQ_24_MHZ, round(float(rng.normal(rssi_mean, rssi_std)), 1)))
    for _ in range(int(rng.poisson(mean5))):
        rows.append((timestamp_ms, _WIFI_FREQ_5_MHZ, round(float(rng.normal(rssi_mean - 3.0, rssi_std)), 1)))
    return rows


def _session_timeline(
    rng: np.random.Generator,
    cfg: SynthConfig,
    label: Label,
    regimes: Sequence[tuple[str, _Regime, int]],
    start_ms: int,
    visible_mean: float,
) -> tuple[list[RawRecord], list[tuple[str, int, int]], list[tuple[int, float, float]]]:
    """Generate records for consecutive (tag, regime, n_epochs) stretches.

    Returns (records, segment spans as (tag, start_ms, end_ms), wifi rows).
    """
    sats = _draw_sky(rng, cfg, visible_mean)
    period_ms = cfg.epoch_period_s * 1000
    records: list[RawRecord] = []
    spans: list[tuple[str, int, int]] = []
    wifi: list[tuple[int, float, float]] = []
    ts = start_ms
    for tag, regime, n_epochs in regimes:
        seg_start = ts
        for _ in range(n_epochs):
            records.extend(_epoch_records(rng, cfg, sats, regime, ts))
            if cfg.wifi_enabled:
                wifi.extend(_wifi_rows(rng, label, ts))
            ts += period_ms
        spans.append((tag, seg_start, ts))
    return records, spans, wifi


def _warmup_epochs(cfg: SynthConfig) -> int:
    # Rows inside the first 20 s are trimmed downstream; emit them anyway so the
    # generated files behave exactly like real captures.
    return math.ceil(20_000 / (cfg.epoch_period_s * 1000))


def records_to_csv(records: Sequence[RawRecord], path: Path) -> None:
    """Write records in the default ingest schema with fixed float formats."""
    s = DEFAULT_SCHEMA
    lines = [
        ",".join(
            (s.timestamp, s.svid, s.constellation, s.azimuth, s.elevation,
             s.carrier_frequency, s.cnr, s.used_in_fix)
        )
    ]
    for r in records:
        lines.append(
            f"{r.timestamp_ms},{r.svid},{r.constellation.name},"
            f"{r.azimuth_deg:.1f},{r.elevation_deg:.1f},"
            f"{r.carrier_frequency_mhz:.2f},{r.cnr_dbhz:.1f},"
            f"{'true' if r.used_in_fix else 'false'}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _wifi_to_csv(rows: Sequence[tuple[int, float, float]], path: Path) -> None:
    lines = ["timestamp,frequency_mhz,rssi_dbm"]
    for ts, freq, rssi in rows:
        lines.append(f"{ts},{freq:.1f},{rssi:.1f}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def generate_sessions(
    cfg: SynthConfig, out_dir: Path | str, group: Group = Group.A
) -> list[SessionManifestEntry]:
    """Write n_sessions_per_class indoor + outdoor session CSVs and a manifest.

    Indoor sessions are interior by default; a near_window_mix fraction of them
    use the weaker near-window regime and carry the matching sublabel. Returns
    the manifest entries (also written to out_dir/manifest.csv).
    """
    out_dir = Path(out_dir)
    sessions_dir = out_dir / "sessions"
    sessions_dir.mkdir(parents=True, exist_ok=True)

    n = cfg.n_sessions_per_class
    n_near_window = int(round(cfg.near_window_mix * n))
    seeds = np.random.SeedSequence(cfg.seed).spawn(2 * n)
    entries: list[SessionManifestEntry] = []
    session_index = 0

    def emit(label: Label, i: int, regime: _Regime, sublabel: Optional[Sublabel], visible_mean: float):
        nonlocal session_index
        rng = np.random.default_rng(seeds[session_index])
        start_ms = _SESSION_EPOCH_BASE_MS + session_index * _SESSION_SPACING_MS
        n_epochs = _warmup_epochs(cfg) + cfg.epochs_per_session
        records, _, wifi = _session_timeline(
            rng, cfg, label, [("all", regime, n_epochs)], start_ms, visible_mean
        )
        name = f"{label.value}_{i:02d}"
        csv_path = sessions_dir / f"{name}.csv"
        records_to_csv(records, csv_path)
        wifi_path = None
        if cfg.wifi_enabled:
            wifi_path = sessions_dir / f"{name}_wifi.csv"
            _wifi_to_csv(wifi, wifi_path)
        entries.append(
            SessionManifestEntry(
                file_path=csv_path,
                label=label,
                group=group,
                location_tag=f"synth_{name}",
                sublabel=sublabel,
                wifi_path=wifi_path,
            )
        )
        session_index += 1

    for i in range(n):
        near_window = i < n_near_window
        emit(
            Label.INDOOR,
            i,
            _indoor_regime(cfg, _NEAR_WINDOW_FACTOR if near_window else 1.0),
            Sublabel.NEAR_WINDOW if near_window else Sublabel.INTERIOR,
            cfg.indoor_visible_sats_mean,
        )
    for i in range(n):
        emit(Label.OUTDOOR, i, _OUTDOOR_REGIME, None, cfg.outdoor_visible_sats_mean)

    write_manifest(entries, out_dir / "manifest.csv")
    return entries


class ContainmentKind:
    UNDER_BRIDGE = "under_bridge"
    NEAR_WINDOW = "near_window"


@dataclass
class ContainmentSegment:
    tag: str
    true_label: Label
    epochs: list[Epoch]


def _containment_plan(cfg: SynthConfig, kind: str) -> tuple[Label, float, list[tuple[str, _Regime, int]]]:
    """(true label, visible mean, alternating segment plan) for a containment run."""
    if kind == ContainmentKind.UNDER_BRIDGE:
        open_regime, special = _OUTDOOR_REGIME, _bridge_regime(cfg)
        plan = []
        for _ in range(3):
            plan.append(("open_road", open_regime, 36))
            plan.append(("under_bridge", special, 10))
        return Label.OUTDOOR, cfg.outdoor_visible_sats_mean, plan
    if kind == ContainmentKind.NEAR_WINDOW:
        interior, window = _indoor_regime(cfg), _indoor_regime(cfg, _NEAR_WINDOW_FACTOR)
        plan = []
        for _ in range(3):
            plan.append(("interior", interior, 24))
            plan.append(("near_window", window, 24))
        return Label.INDOOR, cfg.indoor_visible_sats_mean, plan
    raise InvalidConfig(f"unknown containment scenario {kind!r}")


def generate_containment_scenario(cfg: SynthConfig, kind: str) -> list[ContainmentSegment]:
    """In-memory containment segments: epoch-grouped records per tagged stretch."""
    label, visible_mean, plan = _containment_plan(cfg, kind)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
    records, spans, _ = _session_timeline(
        rng, cfg, label, plan, _SESSION_EPOCH_BASE_MS, visible_mean
    )
    epochs = group_into_epochs(records)
    segments = []
    for tag, start_ms, end_ms in spans:
        seg_epochs = [e for e in epochs if start_ms <= e.timestamp_ms < end_ms]
        segments.append(ContainmentSegment(tag=tag, true_label=label, epochs=seg_epochs))
    return segments


def generate_containment_files(
    cfg: SynthConfig, kind: str, out_dir: Path | str
) -> tuple[Path, Path]:
    """Write a containment session CSV (with startup warmup) plus a segments CSV.

    The segments file lists tag,start_ms,end_ms spans; warmup epochs precede the
    first span so the downstream startup trim never eats scenario data.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    label, visible_mean, plan = _containment_plan(cfg, kind)
    warm_regime = plan[0][1]
    full_plan = [("warmup", warm_regime, _warmup_epochs(cfg))] + plan
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
    records, spans, _ = _session_timeline(
        rng, cfg, label, full_plan, _SESSION_EPOCH_BASE_MS, visible_mean
    )
    session_path = out_dir / f"{kind}_session.csv"
    records_to_csv(records, session_path)
    segments_path = out_dir / f"{kind}_segments.csv"
    lines = ["tag,start_ms,end_ms"]
    for tag, start_ms, end_ms in spans:
        if tag == "warmup":
            continue
        lines.append(f"{tag},{start_ms},{end_ms}")
    segments_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return session_path, segments_path
