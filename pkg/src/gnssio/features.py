"""Satellite keys, ML feature vectors, Wi-Fi epoch aggregates, and Min-Max normalization."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyEpoch, EmptyTrainingSet, MissingFrequency
from .ingest import Epoch, RawRecord, Session, WifiScan
from .types import (
    Constellation,
    FeatureMode,
    Label,
    WifiBand,
    WifiEpochFeatures,
    WIFI_RSSI_SENTINEL,
    WIFI_SENTINEL_FEATURES,
)

# Sentinel for missing azimuth/elevation in ML vectors; outside both valid ranges.
ANGLE_SENTINEL = -1.0

GNSS_FEATURE_ORDER = (
    "constellation_code",
    "svid",
    "azimuth_deg",
    "elevation_deg",
    "carrier_frequency_mhz",
    "cnr_dbhz",
    "used_in_fix",
    "epoch_mean_cnr",
    "epoch_satellite_count",
)

WIFI_FEATURE_ORDER = (
    "n_ap_24ghz",
    "n_ap_5ghz",
    "mean_rssi_24",
    "mean_rssi_5",
    "max_rssi_24",
    "max_rssi_5",
)


def feature_order(mode: FeatureMode) -> tuple[str, ...]:
    if mode is FeatureMode.GNSS_ONLY:
        return GNSS_FEATURE_ORDER
    if mode is FeatureMode.WIFI_ONLY:
        return WIFI_FEATURE_ORDER
    return GNSS_FEATURE_ORDER + WIFI_FEATURE_ORDER


@dataclass(frozen=True)
class SatelliteKey:
    """Identity of one satellite signal: constellation, SVID, 0.1 MHz frequency bucket."""

    constellation: Constellation
    svid: int
    frequency_bucket: float

    def sort_key(self) -> tuple[int, int, float]:
        return (self.constellation.value, self.svid, self.frequency_bucket)


def make_key(obs: RawRecord) -> SatelliteKey:
    """Build the per-satellite lookup key; frequency is bucketed to 0.1 MHz."""
    if obs.carrier_frequency_mhz is None:
        raise MissingFrequency(f"observation svid={obs.svid} has no carrier frequency")
    bucket = round(obs.carrier_frequency_mhz * 10.0) / 10.0
    return SatelliteKey(constellation=obs.constellation, svid=obs.svid, frequency_bucket=bucket)


@dataclass(frozen=True)
class ObservationFeatures:
    """Per-observation ML feature vector, with the two epoch-wide cross features."""

    constellation_code: int
    svid: int
    azimuth_deg: float
    elevation_deg: float
    carrier_frequency_mhz: float
    cnr_dbhz: float
    used_in_fix: int
    epoch_mean_cnr: float
    epoch_satellite_count: int
    wifi: Optional[WifiEpochFeatures] = None

    def to_vector(self, mode: FeatureMode) -> list[float]:
        gnss = [
            float(self.constellation_code),
            float(self.svid),
            self.azimuth_deg,
            self.elevation_deg,
            self.carrier_frequency_mhz,
            self.cnr_dbhz,
            float(self.used_in_fix),
            self.epoch_mean_cnr,
            float(self.epoch_satellite_count),
        ]
        if mode is FeatureMode.GNSS_ONLY:
            return gnss
        wifi = self.wifi if self.wifi is not None else WIFI_SENTINEL_FEATURES
        wifi_vec = wifi_feature_vector(wifi)
        if mode is FeatureMode.WIFI_ONLY:
            return wifi_vec
        return gnss + wifi_vec


def wifi_feature_vector(wifi: WifiEpochFeatures) -> list[float]:
    return [
        float(wifi.n_ap_24ghz),
        float(wifi.n_ap_5ghz),
        wifi.mean_rssi_24,
        wifi.mean_rssi_5,
        wifi.max_rssi_24,
        wifi.max_rssi_5,
    ]


def build_observation_features(
    epoch: Epoch,
    wifi: Optional[WifiEpochFeatures] = None,
    include_wifi: bool = False,
) -> list[ObservationFeatures]:
    """One feature vector per observation of the epoch, cross features injected.

    With include_wifi=True the Wi-Fi block is always populated: from `wifi`, the
    epoch's attached features, or the sentinel block when neither exists.
    """
    if not epoch.observations:
        raise EmptyEpoch(f"epoch at {epoch.timestamp_ms} has no observations")
    wifi_feats = wifi if wifi is not None else epoch.wifi
    if include_wifi and wifi_feats is None:
        wifi_feats = WIFI_SENTINEL_FEATURES
    out = []
    for obs in epoch.observations:
        out.append(
            ObservationFeatures(
                constellation_code=obs.constellation.value,
                svid=obs.svid,
                azimuth_deg=obs.azimuth_deg if obs.azimuth_deg is not None else ANGLE_SENTINEL,
                elevation_deg=obs.elevation_deg if obs.elevation_deg is not None else ANGLE_SENTINEL,
                carrier_frequency_mhz=obs.carrier_frequency_mhz,
                cnr_dbhz=obs.cnr_dbhz,
                used_in_fix=int(obs.used_in_fix),
                epoch_mean_cnr=epoch.mean_cnr,
                epoch_satellite_count=epoch.satellite_count,
                wifi=wifi_feats if include_wifi else None,
            )
        )
    return out


def epoch_matrix(
    epoch: Epoch, mode: FeatureMode, wifi: Optional[WifiEpochFeatures] = None
) -> np.ndarray:
    """Feature matrix for one epoch: one row per observation, or one Wi-Fi row.

    `wifi` overrides the epoch's attached Wi-Fi features when given.
    """
    if mode is FeatureMode.WIFI_ONLY:
        chosen = wifi if wifi is not None else epoch.wifi
        if chosen is None:
            chosen = WIFI_SENTINEL_FEATURES
        return np.array([wifi_feature_vector(chosen)], dtype=np.float64)
    include_wifi = mode is FeatureMode.FUSED
    rows = [
        f.to_vector(mode)
        for f in build_observation_features(epoch, wifi=wifi, include_wifi=include_wifi)
    ]
    return np.array(rows, dtype=np.float64)


def collect_training_vectors(
    sessions: Sequence[Session], mode: FeatureMode
) -> tuple[np.ndarray, np.ndarray]:
    """Stack feature rows for every epoch of every session.

    Returns (X, y) with y holding 1 for indoor rows and 0 for outdoor rows.
    """
    blocks: list[np.ndarray] = []
    labels: list[np.ndarray] = []
    for sess in sessions:
        y_val = 1 if sess.label is Label.INDOOR else 0
        for epoch in sess.epochs:
            m = epoch_matrix(epoch, mode)
            blocks.append(m)
            labels.append(np.full(m.shape[0], y_val, dtype=np.int8))
    if not blocks:
        raise EmptyTrainingSet("no epochs available to build training vectors")
    return np.concatenate(blocks, axis=0), np.concatenate(labels)


@dataclass(frozen=True)
class Normalizer:
    """Per-column Min-Max scaler learned on training data only.

    transform maps each column through (x - min) / (max - min) and clamps to
    [0, 1]; constant columns map to 0.
    """

    mins: np.ndarray
    maxs: np.ndarray

    @property
    def n_features(self) -> int:
        return int(self.mins.shape[0])

    def transform(self, x: np.ndarray) -> np.ndarray:
        span = self.maxs - self.mins
        safe_span = np.where(span == 0.0, 1.0, span)
        scaled = (x - self.mins) / safe_span
        scaled = np.where(span == 0.0, 0.0, scaled)
        return np.clip(scaled, 0.0, 1.0)

    def inverse_transform(self, x: np.ndarray) -> np.ndarray:
        """Undo scaling on non-constant columns; constant columns return their min."""
        span = self.maxs - self.mins
        return x * span + self.mins


def fit_normalizer(train_vectors: np.ndarray) -> Normalizer:
    if train_vectors.size == 0:
        raise EmptyTrainingSet("cannot fit a normalizer on zero vectors")
    x = np.asarray(train_vectors, dtype=np.float64)
    return Normalizer(mins=x.min(axis=0), maxs=x.max(axis=0))


def apply_normalizer(normalizer: Normalizer, vectors: np.ndarray) -> np.ndarray:
    return normalizer.transform(np.asarray(vectors, dtype=np.float64))


def compute_wifi_epoch_features(scans: Sequence[WifiScan]) -> WifiEpochFeatures:
    """Aggregate one timestamp's AP sightings into the six per-band features.

    An empty band contributes count 0 and the RSSI sentinel for mean and max.
    """
    rssi_24 = [s.rssi_dbm for s in scans if s.band is WifiBand.GHZ_24]
    rssi_5 = [s.rssi_dbm for s in scans if s.band is WifiBand.GHZ_5]
    return WifiEpochFeatures(
        n_ap_24ghz=len(rssi_24),
        n_ap_5ghz=len(rssi_5),
        mean_rssi_24=sum(rssi_24) / len(rssi_24) if rssi_24 else WIFI_RSSI_SENTINEL,
        mean_rssi_5=sum(rssi_5) / len(rssi_5) if rssi_5 else WIFI_RSSI_SENTINEL,
        max_rssi_24=max(rssi_24) if rssi_24 else WIFI_RSSI_SENTINEL,
        max_rssi_5=max(rssi_5) if rssi_5 else WIFI_RSSI_SENTINEL,
    )


def attach_wifi_features(session: Session, scans_by_ts: dict[int, list[WifiScan]]) -> Session:
    """Attach per-epoch Wi-Fi aggregates to a session, matching on exact timestamp."""
    session.epochs = [
        ep.with_wifi(compute_wifi_epoch_features(scans_by_ts[ep.timestamp_ms]))
        if ep.timestamp_ms in scans_by_ts
        else ep
        for ep in session.epochs
    ]
    return session
