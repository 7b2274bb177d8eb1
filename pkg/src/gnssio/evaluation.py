"""Scenario splits, per-class accuracy metrics, ROC/scatter exports, containment reports."""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

from .errors import FeatureModeMismatch, MissingGroup, OneClassOnly
from .features import SatelliteKey, make_key
from .ingest import Epoch, Session
from .temporal import WindowConfig, aggregate_window
from .threshold import RocPoint, sweep_values
from .types import Group, Label, PredictionTrace


class Scenario(enum.Enum):
    # S1: mixed testing (80/20 split of group A, group B appended to test).
    # S2: train on all of group A, test on all of group B.
    S1 = "s1"
    S2 = "s2"


@dataclass
class ScenarioSplit:
    scenario: Scenario
    train_sessions: list
    test_sessions: list
    split_seed: int


def make_split(
    sessions: Sequence,
    scenario: Scenario,
    seed: int = 0,
    train_fraction: float = 0.8,
) -> ScenarioSplit:
    """Deterministic session-granular split; no session lands on both sides.

    Items only need a `.group` attribute, so both manifest entries and loaded
    sessions work.
    """
    group_a = [s for s in sessions if s.group is Group.A]
    group_b = [s for s in sessions if s.group is Group.B]

    if scenario is Scenario.S2:
        if not group_a:
            raise MissingGroup("scenario S2 needs Group A sessions for training")
        if not group_b:
            raise MissingGroup("scenario S2 needs Group B sessions for testing")
        return ScenarioSplit(scenario, list(group_a), list(group_b), seed)

    if len(group_a) < 2:
        raise MissingGroup("scenario S1 needs at least two Group A sessions to split")
    shuffled = list(group_a)
    random.Random(seed).shuffle(shuffled)
    n_test = max(1, int(round(len(shuffled) * (1.0 - train_fraction))))
    n_test = min(n_test, len(shuffled) - 1)
    test = shuffled[:n_test] + group_b
    train = shuffled[n_test:]
    return ScenarioSplit(scenario, train, test, seed)


@dataclass
class ClassMetrics:
    """Per-class accuracies with the confusion counts behind them.

    true_indoor/false_outdoor partition the indoor units; true_outdoor/
    false_indoor partition the outdoor units.
    """

    true_indoor: int = 0
    false_outdoor: int = 0
    true_outdoor: int = 0
    false_indoor: int = 0

    @property
    def n_indoor(self) -> int:
        return self.true_indoor + self.false_outdoor

    @property
    def n_outdoor(self) -> int:
        return self.true_outdoor + self.false_indoor

    @property
    def indoor_accuracy(self) -> float:
        return self.true_indoor / self.n_indoor if self.n_indoor else float("nan")

    @property
    def outdoor_accuracy(self) -> float:
        return self.true_outdoor / self.n_outdoor if self.n_outdoor else float("nan")

    def add(self, truth: Label, predicted: Label) -> None:
        if truth is Label.INDOOR:
            if predicted is Label.INDOOR:
                self.true_indoor += 1
            else:
                self.false_outdoor += 1
        else:
            if predicted is Label.OUTDOOR:
                self.true_outdoor += 1
            else:
                self.false_indoor += 1

    def merge(self, other: "ClassMetrics") -> None:
        self.true_indoor += other.true_indoor
        self.false_outdoor += other.false_outdoor
        self.true_outdoor += other.true_outdoor
        self.false_indoor += other.false_indoor


@dataclass
class EvalResult:
    metrics: ClassMetrics
    by_sublabel: dict[str, ClassMetrics] = field(default_factory=dict)


def evaluate_predictions(
    sessions_with_traces: Sequence[tuple[Session, Sequence[PredictionTrace]]],
    window_cfg: WindowConfig,
) -> EvalResult:
    """Score windowed predictions against each session's file-level label.

    The evaluation unit is the window; per-window ground truth is the session
    label. Indoor sessions also feed a per-sublabel breakdown (interior vs
    near-window).
    """
    result = EvalResult(metrics=ClassMetrics())
    for session, traces in sessions_with_traces:
        session_metrics = ClassMetrics()
        for _, predicted in aggregate_window(traces, window_cfg):
            session_metrics.add(session.label, predicted)
        result.metrics.merge(session_metrics)
        if session.sublabel is not None:
            bucket = result.by_sublabel.setdefault(session.sublabel.value, ClassMetrics())
            bucket.merge(session_metrics)
    return result


def evaluate(
    model,
    split: ScenarioSplit,
    window_cfg: WindowConfig,
    feature_mode=None,
) -> EvalResult:
    """Run a trained model over split.test_sessions and score it.

    `model` is either a bundle exposing predict_epoch/feature_mode or a bare
    epoch-predictor callable. Passing feature_mode asserts the bundle was
    trained with matching features.
    """
    if hasattr(model, "predict_epoch"):
        if feature_mode is not None and model.feature_mode is not feature_mode:
            raise FeatureModeMismatch(
                f"model was trained with {model.feature_mode.value} features, "
                f"requested {feature_mode.value}"
            )
        predict_epoch: Callable[[Epoch], PredictionTrace] = model.predict_epoch
    else:
        predict_epoch = model
    pairs = []
    for session in split.test_sessions:
        traces = [predict_epoch(epoch) for epoch in session.epochs]
        pairs.append((session, traces))
    return evaluate_predictions(pairs, window_cfg)


class RocFeature(enum.Enum):
    MEAN_CNR = "mean_cnr"
    SATELLITE_COUNT = "satellite_count"


def export_roc(
    sessions: Sequence[Session],
    feature: Union[RocFeature, SatelliteKey],
) -> list[RocPoint]:
    """ROC table for an epoch-level feature or one satellite's CNR.

    Epoch features (mean CNR, satellite count) contribute one sample per epoch;
    a SatelliteKey contributes one sample per observation of that satellite.
    """
    indoor: list[float] = []
    outdoor: list[float] = []
    for session in sessions:
        bucket = indoor if session.label is Label.INDOOR else outdoor
        for epoch in session.epochs:
            if feature is RocFeature.MEAN_CNR:
                bucket.append(epoch.mean_cnr)
            elif feature is RocFeature.SATELLITE_COUNT:
                bucket.append(float(epoch.satellite_count))
            else:
                for obs in epoch.observations:
                    if make_key(obs) == feature:
                        bucket.append(obs.cnr_dbhz)
    if not indoor or not outdoor:
        raise OneClassOnly("ROC export needs samples of both classes")
    return sweep_values(indoor, outdoor)


def export_cnr_elevation(
    sessions: Sequence[Session], label_filter: Optional[Label] = None
) -> list[tuple[float, float]]:
    """(elevation_deg, cnr_dbhz) scatter rows, optionally restricted to one label.

    Observations without a valid elevation are excluded.
    """
    rows: list[tuple[float, float]] = []
    for session in sessions:
        if label_filter is not None and session.label is not label_filter:
            continue
        for epoch in session.epochs:
            for obs in epoch.observations:
                if obs.elevation_deg is None:
                    continue
                rows.append((obs.elevation_deg, obs.cnr_dbhz))
    return rows


@dataclass(frozen=True)
class ContainmentSegmentStats:
    segment_tag: str
    n_samples: int
    avg_cnr: float
    avg_satellite_count: float
    pct_predicted_indoor: float
    pct_predicted_outdoor: float


def containment_report(
    predict_epoch: Callable[[Epoch], PredictionTrace],
    segments: Sequence[tuple[str, Sequence[Epoch]]],
) -> list[ContainmentSegmentStats]:
    """Per-segment signal statistics and prediction percentages.

    A sample is one epoch; avg_cnr averages the per-epoch mean CNR. The two
    prediction percentages always sum to 100 for a nonempty segment.
    """
    stats = []
    for tag, epochs in segments:
        epochs = list(epochs)
        n = len(epochs)
        if n == 0:
            stats.append(ContainmentSegmentStats(tag, 0, float("nan"), float("nan"), 0.0, 0.0))
            continue
        n_indoor = sum(
            1 for e in epochs if predict_epoch(e).final_label is Label.INDOOR
        )
        stats.append(
            ContainmentSegmentStats(
                segment_tag=tag,
                n_samples=n,
                avg_cnr=sum(e.mean_cnr for e in epochs) / n,
                avg_satellite_count=sum(e.satellite_count for e in epochs) / n,
                pct_predicted_indoor=100.0 * n_indoor / n,
                pct_predicted_outdoor=100.0 * (n - n_indoor) / n,
            )
        )
    return stats
