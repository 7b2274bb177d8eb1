"""Per-satellite CNR threshold classifier.

Training sweeps candidate thresholds per satellite key, scores each by total
accuracy, and stores the best in a lookup table. Prediction compares each
observed CNR against its satellite's threshold (at or below => indoor vote),
aggregates votes by majority, and short-circuits to indoor when 10 or fewer
satellites are visible.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyTrainingSet, OneClassOnly, ZeroTotal
from .features import SatelliteKey, make_key
from .ingest import Epoch, Session
from .types import Label, MethodTag, PredictionTrace, majority_label

DEFAULT_SAT_COUNT_PRIOR = 10
DEFAULT_MIN_SAMPLES_PER_KEY = 30
GRID_POLICY = "observed+midpoints"


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    pd: float
    pf: float
    n_indoor: int
    n_outdoor: int


@dataclass(frozen=True)
class ThresholdEntry:
    key: SatelliteKey | None  # None for the epoch-mean fallback entry
    threshold: float
    train_accuracy: float
    n_indoor: int
    n_outdoor: int
    # Samples at or below the chosen threshold, kept so the stored accuracy can
    # be recomputed from counts alone.
    n_indoor_at_or_below: int
    n_outdoor_at_or_below: int

    @property
    def n_train_samples(self) -> int:
        return self.n_indoor + self.n_outdoor


@dataclass
class ThresholdTable:
    entries: dict[SatelliteKey, ThresholdEntry] = field(default_factory=dict)
    mean_cnr_fallback_threshold: float = 0.0
    fallback_entry: ThresholdEntry | None = None
    sat_count_prior: int = DEFAULT_SAT_COUNT_PRIOR
    min_samples_per_key: int = DEFAULT_MIN_SAMPLES_PER_KEY
    grid_policy: str = GRID_POLICY


def threshold_grid(values: Iterable[float]) -> np.ndarray:
    """Candidate thresholds: each distinct observed value, the midpoints between
    consecutive distinct values, and one point below the minimum so the sweep
    reaches the (PD, PF) = (0, 0) endpoint."""
    distinct = np.unique(np.asarray(list(values), dtype=np.float64))
    if distinct.size == 0:
        return distinct
    mids = (distinct[:-1] + distinct[1:]) / 2.0
    # near-adjacent floats can round a midpoint onto an endpoint; unique both
    # sorts and removes those collisions
    return np.unique(np.concatenate(([distinct[0] - 1.0], distinct, mids)))


def sweep_values(indoor: Sequence[float], outdoor: Sequence[float]) -> list[RocPoint]:
    """ROC sweep over a labeled scalar feature with the rule value <= t => indoor.

    PD(t) is the fraction of indoor samples at or below t; PF(t) the fraction of
    outdoor samples at or below t. Both are nondecreasing in t by construction.
    """
    ind = np.sort(np.asarray(indoor, dtype=np.float64))
    out = np.sort(np.asarray(outdoor, dtype=np.float64))
    if ind.size == 0 or out.size == 0:
        raise OneClassOnly("ROC sweep needs at least one sample of each class")
    grid = threshold_grid(np.concatenate([ind, out]))
    pd_counts = np.searchsorted(ind, grid, side="right")
    pf_counts = np.searchsorted(out, grid, side="right")
    n_in, n_out = int(ind.size), int(out.size)
    return [
        RocPoint(
            threshold=float(t),
            pd=int(ci) / n_in,
            pf=int(co) / n_out,
            n_indoor=n_in,
            n_outdoor=n_out,
        )
        for t, ci, co in zip(grid, pd_counts, pf_counts)
    ]


def sweep_roc(
    key: SatelliteKey, labeled_cnrs: Sequence[tuple[float, Label]]
) -> list[RocPoint]:
    """ROC table for one satellite key from (cnr, label) samples."""
    indoor = [c for c, lab in labeled_cnrs if lab is Label.INDOOR]
    outdoor = [c for c, lab in labeled_cnrs if lab is Label.OUTDOOR]
    if not indoor or not outdoor:
        raise OneClassOnly(f"key {key} has samples of only one class")
    return sweep_values(indoor, outdoor)


def total_accuracy(pd: float, pf: float, n_indoor: int, n_outdoor: int) -> float:
    """Accuracy of the threshold rule: (PD*N_in + (1-PF)*N_out) / N_total."""
    if n_indoor < 0 or n_outdoor < 0:
        raise ValueError("sample counts must be nonnegative")
    n_total = n_indoor + n_outdoor
    if n_total == 0:
        raise ZeroTotal("total accuracy undefined for zero samples")
    return (pd * n_indoor) / n_total + ((1.0 - pf) * n_outdoor) / n_total


def select_threshold(roc: Sequence[RocPoint], key: SatelliteKey | None = None) -> ThresholdEntry:
    """Pick the ROC point maximizing total accuracy; ties go to the smallest threshold."""
    if not roc:
        raise ValueError("cannot select a threshold from an empty ROC table")
    best = roc[0]
    best_acc = total_accuracy(best.pd, best.pf, best.n_indoor, best.n_outdoor)
    for point in roc[1:]:
        acc = total_accuracy(point.pd, point.pf, point.n_indoor, point.n_outdoor)
        if acc > best_acc or (acc == best_acc and point.threshold < best.threshold):
            best, best_acc = point, acc
    return ThresholdEntry(
        key=key,
        threshold=best.threshold,
        train_accuracy=best_acc,
        n_indoor=best.n_indoor,
        n_outdoor=best.n_outdoor,
        n_indoor_at_or_below=round(best.pd * best.n_indoor),
        n_outdoor_at_or_below=round(best.pf * best.n_outdoor),
    )


def collect_key_samples(
    sessions: Sequence[Session],
) -> dict[SatelliteKey, tuple[list[float], list[float]]]:
    """Per-key (indoor CNRs, outdoor CNRs) pooled across all training sessions."""
    samples: dict[SatelliteKey, tuple[list[float], list[float]]] = {}
    for sess in sessions:
        idx = 0 if sess.label is Label.INDOOR else 1
        for epoch in sess.epochs:
            for obs in epoch.observations:
                key = make_key(obs)
                samples.setdefault(key, ([], []))[idx].append(obs.cnr_dbhz)
    return samples


def train_threshold_table(
    train_sessions: Sequence[Session],
    sat_count_prior: int = DEFAULT_SAT_COUNT_PRIOR,
    min_samples_per_key: int = DEFAULT_MIN_SAMPLES_PER_KEY,
) -> ThresholdTable:
    """Train per-key thresholds plus the epoch-mean-CNR fallback threshold.

    A key enters the table only when both classes contribute at least
    min_samples_per_key observations. The fallback threshold is trained by the
    same sweep/selection applied to per-epoch mean CNR values.
    """
    if not train_sessions:
        raise EmptyTrainingSet("threshold training needs at least one session")
    labels = {s.label for s in train_sessions}
    if len(labels) < 2:
        raise OneClassOnly("threshold training needs both indoor and outdoor sessions")

    table = ThresholdTable(
        sat_count_prior=sat_count_prior, min_samples_per_key=min_samples_per_key
    )
    key_samples = collect_key_samples(train_sessions)
    for key in sorted(key_samples, key=SatelliteKey.sort_key):
        indoor, outdoor = key_samples[key]
        if len(indoor) < min_samples_per_key or len(outdoor) < min_samples_per_key:
            continue
        entry = select_threshold(sweep_values(indoor, outdoor), key=key)
        table.entries[key] = entry

    mean_indoor = [e.mean_cnr for s in train_sessions if s.label is Label.INDOOR for e in s.epochs]
    mean_outdoor = [e.mean_cnr for s in train_sessions if s.label is Label.OUTDOOR for e in s.epochs]
    if not mean_indoor or not mean_outdoor:
        raise OneClassOnly("fallback training needs epochs of both classes")
    fallback = select_threshold(sweep_values(mean_indoor, mean_outdoor))
    table.fallback_entry = fallback
    table.mean_cnr_fallback_threshold = fallback.threshold
    return table


def predict_epoch_threshold(table: ThresholdTable, epoch: Epoch) -> PredictionTrace:
    """Classify one epoch with per-satellite votes, the majority rule, and the
    low-satellite-count prior.

    Votes are recorded for every observation whose key is in the table even when
    the prior forces the indoor label. With no matching keys the epoch mean CNR
    is compared against the fallback threshold instead.
    """
    votes: list[Label] = []
    for obs in epoch.observations:
        if obs.carrier_frequency_mhz is None:  # no key without a frequency
            continue
        entry = table.entries.get(make_key(obs))
        if entry is None:
            continue
        votes.append(Label.INDOOR if obs.cnr_dbhz <= entry.threshold else Label.OUTDOOR)

    prior_applied = epoch.satellite_count <= table.sat_count_prior
    if prior_applied:
        final = Label.INDOOR
    elif votes:
        final = majority_label(votes)
    else:
        final = (
            Label.INDOOR
            if epoch.mean_cnr <= table.mean_cnr_fallback_threshold
            else Label.OUTDOOR
        )
    return PredictionTrace(
        epoch_timestamp_ms=epoch.timestamp_ms,
        votes=tuple(votes),
        final_label=final,
        prior_applied=prior_applied,
        method=MethodTag.THRESHOLD,
    )
