"""Shared vocabulary: labels, constellations, method tags, prediction traces."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional


class Label(enum.Enum):
    INDOOR = "indoor"
    OUTDOOR = "outdoor"

    @classmethod
    def parse(cls, text: str) -> "Label":
        t = text.strip().lower()
        if t == "indoor":
            return cls.INDOOR
        if t == "outdoor":
            return cls.OUTDOOR
        raise ValueError(f"unknown label {text!r}")


class Constellation(enum.Enum):
    """Satellite system family. Enum values double as the ordinal feature encoding."""

    GPS = 0
    GLONASS = 1
    GALILEO = 2
    BEIDOU = 3
    QZSS = 4
    SBAS = 5
    IRNSS = 6
    OTHER = 7

    @classmethod
    def parse(cls, text: str) -> "Constellation":
        """Map a constellation string to an enum member; unknown strings become OTHER."""
        t = text.strip().upper()
        if t in cls.__members__:
            return cls[t]
        if t == "NAVIC":  # alternate name for IRNSS
            return cls.IRNSS
        return cls.OTHER


class Group(enum.Enum):
    A = "A"
    B = "B"

    @classmethod
    def parse(cls, text: str) -> "Group":
        t = text.strip().upper()
        if t in ("A", "B"):
            return cls[t]
        raise ValueError(f"unknown group {text!r}")


class Sublabel(enum.Enum):
    """Indoor refinement: deep-interior vs window-adjacent locations."""

    INTERIOR = "interior"
    NEAR_WINDOW = "near_window"

    @classmethod
    def parse(cls, text: str) -> Optional["Sublabel"]:
        t = text.strip().lower()
        if t in ("", "none"):
            return None
        for member in cls:
            if t == member.value:
                return member
        raise ValueError(f"unknown sublabel {text!r}")


class MethodTag(enum.Enum):
    THRESHOLD = "threshold"
    SVM = "svm"
    DT = "dt"
    RF = "rf"


class FeatureMode(enum.Enum):
    GNSS_ONLY = "gnss"
    WIFI_ONLY = "wifi"
    FUSED = "fused"


class WifiBand(enum.Enum):
    GHZ_24 = "2.4"
    GHZ_5 = "5"


@dataclass(frozen=True)
class WifiEpochFeatures:
    """Per-timestamp Wi-Fi aggregates: AP counts and per-band mean/max RSSI."""

    n_ap_24ghz: int
    n_ap_5ghz: int
    mean_rssi_24: float
    mean_rssi_5: float
    max_rssi_24: float
    max_rssi_5: float


# Sentinel written into Wi-Fi RSSI features when a band (or the whole scan) is
# absent. Below any plausible reported RSSI.
WIFI_RSSI_SENTINEL = -100.0

WIFI_SENTINEL_FEATURES = WifiEpochFeatures(
    n_ap_24ghz=0,
    n_ap_5ghz=0,
    mean_rssi_24=WIFI_RSSI_SENTINEL,
    mean_rssi_5=WIFI_RSSI_SENTINEL,
    max_rssi_24=WIFI_RSSI_SENTINEL,
    max_rssi_5=WIFI_RSSI_SENTINEL,
)


@dataclass(frozen=True)
class PredictionTrace:
    """Outcome of classifying one epoch, with the vote breakdown that led to it."""

    epoch_timestamp_ms: int
    votes: tuple[Label, ...]
    final_label: Label
    prior_applied: bool
    method: MethodTag


def majority_label(labels: Iterable[Label], tie_break: Label = Label.INDOOR) -> Label:
    """Majority vote over labels; an exact tie resolves to `tie_break`."""
    n_indoor = 0
    n_total = 0
    for lab in labels:
        n_total += 1
        if lab is Label.INDOOR:
            n_indoor += 1
    n_outdoor = n_total - n_indoor
    if n_indoor > n_outdoor:
        return Label.INDOOR
    if n_outdoor > n_indoor:
        return Label.OUTDOOR
    return tie_break
