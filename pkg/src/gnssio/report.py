"""CSV writers and matplotlib figure rendering for the CLI report paths.

Every export is CSV-first; each figure is rendered next to its CSV so the
delimited output stays the machine-readable interface.
"""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .evaluation import ClassMetrics, ContainmentSegmentStats, EvalResult
from .threshold import RocPoint
from .types import Label, PredictionTrace

FIGURE_DPI = 150


def write_roc_csv(points: Sequence[RocPoint], path: Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "pd", "pf", "n_indoor", "n_outdoor"])
        for p in points:
            writer.writerow([p.threshold, p.pd, p.pf, p.n_indoor, p.n_outdoor])


def plot_roc(points: Sequence[RocPoint], path: Path, title: str) -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    pf = [p.pf for p in points]
    pd = [p.pd for p in points]
    ax.plot(pf, pd, "-", color="steelblue", linewidth=2)
    ax.plot([0, 1], [0, 1], "--", color="gray", linewidth=1, label="chance")
    ax.set_xlabel("Probability of false alarm")
    ax.set_ylabel("Probability of detection")
    ax.set_title(title)
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right")
    fig.savefig(path, dpi=FIGURE_DPI, bbox_inches="tight")
    plt.close(fig)


def write_scatter_csv(rows: Sequence[tuple[float, float]], path: Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["elevation_deg", "cnr_dbhz"])
        writer.writerows(rows)


def plot_cnr_elevation(
    rows_by_label: dict[str, Sequence[tuple[float, float]]], path: Path
) -> None:
    fig, ax = plt.subplots(figsize=(7, 5))
    colors = {"indoor": "firebrick", "outdoor": "seagreen"}
    for name, rows in rows_by_label.items():
        if not rows:
            continue
        xs = [r[0] for r in rows]
        ys = [r[1] for r in rows]
        ax.scatter(xs, ys, s=6, alpha=0.35, label=name, color=colors.get(name))
    ax.set_xlabel("Elevation angle (deg)")
    ax.set_ylabel("CNR (dB/Hz)")
    ax.set_title("CNR vs elevation angle")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.savefig(path, dpi=FIGURE_DPI, bbox_inches="tight")
    plt.close(fig)


def _metrics_row(tag: str, m: ClassMetrics) -> list:
    return [
        tag,
        m.n_indoor,
        m.n_outdoor,
        f"{100.0 * m.indoor_accuracy:.2f}" if m.n_indoor else "",
        f"{100.0 * m.outdoor_accuracy:.2f}" if m.n_outdoor else "",
        m.true_indoor,
        m.false_indoor,
        m.true_outdoor,
        m.false_outdoor,
    ]


def write_metrics_csv(
    result: EvalResult, path: Path, method: str, scenario: str, window_s: int, feature_mode: str
) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["method", "scenario", "window_seconds", "feature_mode", "subset",
             "n_indoor", "n_outdoor", "indoor_accuracy_pct", "outdoor_accuracy_pct",
             "true_indoor", "false_indoor", "true_outdoor", "false_outdoor"]
        )
        head = [method, scenario, window_s, feature_mode]
        writer.writerow(head + _metrics_row("all", result.metrics))
        for tag in sorted(result.by_sublabel):
            writer.writerow(head + _metrics_row(tag, result.by_sublabel[tag]))


def format_metrics_text(
    result: EvalResult, method: str, scenario: str, window_s: int, feature_mode: str
) -> str:
    m = result.metrics
    lines = [
        f"method={method} scenario={scenario} window={window_s}s features={feature_mode}",
        f"  indoor  accuracy: {100.0 * m.indoor_accuracy:6.2f}%  ({m.true_indoor}/{m.n_indoor} windows)"
        if m.n_indoor else "  indoor  accuracy:    n/a  (no indoor windows)",
        f"  outdoor accuracy: {100.0 * m.outdoor_accuracy:6.2f}%  ({m.true_outdoor}/{m.n_outdoor} windows)"
        if m.n_outdoor else "  outdoor accuracy:    n/a  (no outdoor windows)",
    ]
    for tag in sorted(result.by_sublabel):
        sub = result.by_sublabel[tag]
        if sub.n_indoor:
            lines.append(
                f"  [{tag}] indoor accuracy: {100.0 * sub.indoor_accuracy:6.2f}% "
                f"({sub.true_indoor}/{sub.n_indoor} windows)"
            )
    return "\n".join(lines) + "\n"


def plot_accuracy_bars(result: EvalResult, path: Path, title: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    m = result.metrics
    names = ["indoor", "outdoor"]
    values = [
        100.0 * m.indoor_accuracy if m.n_indoor else 0.0,
        100.0 * m.outdoor_accuracy if m.n_outdoor else 0.0,
    ]
    bars = ax.bar(names, values, color=["firebrick", "seagreen"], width=0.5)
    for bar, v in zip(bars, values):
        ax.text(bar.get_x() + bar.get_width() / 2, v + 1, f"{v:.1f}", ha="center", fontsize=10)
    ax.set_ylim(0, 110)
    ax.set_ylabel("Accuracy (%)")
    ax.set_title(title)
    ax.grid(True, axis="y", alpha=0.3)
    fig.savefig(path, dpi=FIGURE_DPI, bbox_inches="tight")
    plt.close(fig)


def write_containment_csv(stats: Sequence[ContainmentSegmentStats], path: Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["segment_tag", "n_samples", "avg_cnr_dbhz", "avg_satellite_count",
             "pct_predicted_indoor", "pct_predicted_outdoor"]
        )
        for s in stats:
            writer.writerow(
                [s.segment_tag, s.n_samples, f"{s.avg_cnr:.1f}", f"{s.avg_satellite_count:.1f}",
                 f"{s.pct_predicted_indoor:.1f}", f"{s.pct_predicted_outdoor:.1f}"]
            )


def format_containment_text(stats: Sequence[ContainmentSegmentStats]) -> str:
    lines = []
    for s in stats:
        lines.append(
            f"{s.segment_tag}: n={s.n_samples} avg_cnr={s.avg_cnr:.1f} dB/Hz "
            f"avg_sats={s.avg_satellite_count:.1f} "
            f"predicted indoor {s.pct_predicted_indoor:.0f}% / outdoor {s.pct_predicted_outdoor:.0f}%"
        )
    return "\n".join(lines) + "\n"


def plot_containment(stats: Sequence[ContainmentSegmentStats], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    tags = [s.segment_tag for s in stats]
    indoor = [s.pct_predicted_indoor for s in stats]
    outdoor = [s.pct_predicted_outdoor for s in stats]
    x = range(len(tags))
    ax.bar(x, indoor, label="predicted indoor", color="firebrick")
    ax.bar(x, outdoor, bottom=indoor, label="predicted outdoor", color="seagreen")
    ax.set_xticks(list(x))
    ax.set_xticklabels(tags, rotation=20, ha="right")
    ax.set_ylabel("% of epochs")
    ax.set_title("Predictions by containment segment")
    ax.legend(loc="upper right")
    fig.savefig(path, dpi=FIGURE_DPI, bbox_inches="tight")
    plt.close(fig)


def write_predictions_csv(
    traces: Sequence[PredictionTrace],
    windows: Sequence[tuple[int, Label]],
    window_seconds: int,
    path: Path,
) -> None:
    """One row per epoch with its window assignment, then one row per window."""
    window_label = dict(windows)
    t0 = traces[0].epoch_timestamp_ms if traces else 0
    width_ms = window_seconds * 1000
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["row_type", "timestamp_ms", "window_index", "label",
             "votes_indoor", "votes_outdoor", "prior_applied"]
        )
        for tr in traces:
            k = (tr.epoch_timestamp_ms - t0) // width_ms
            n_in = sum(1 for v in tr.votes if v is Label.INDOOR)
            writer.writerow(
                ["epoch", tr.epoch_timestamp_ms, k, tr.final_label.value,
                 n_in, len(tr.votes) - n_in, int(tr.prior_applied)]
            )
        for k, lab in windows:
            writer.writerow(["window", t0 + k * width_ms, k, lab.value, "", "", ""])


def plot_prediction_timeline(
    traces: Sequence[PredictionTrace],
    windows: Sequence[tuple[int, Label]],
    window_seconds: int,
    path: Path,
) -> None:
    if not traces:
        return
    fig, ax = plt.subplots(figsize=(9, 3))
    t0 = traces[0].epoch_timestamp_ms
    xs = [(tr.epoch_timestamp_ms - t0) / 1000.0 for tr in traces]
    ys = [1 if tr.final_label is Label.INDOOR else 0 for tr in traces]
    ax.step(xs, ys, where="post", color="steelblue", label="epoch label")
    wx, wy = [], []
    for k, lab in windows:
        wx.append(k * window_seconds)
        wy.append(1 if lab is Label.INDOOR else 0)
    ax.plot(wx, wy, "o", color="firebrick", markersize=5, label=f"{window_seconds}s window")
    ax.set_yticks([0, 1])
    ax.set_yticklabels(["outdoor", "indoor"])
    ax.set_xlabel("Elapsed time (s)")
    ax.set_title("Predicted environment over time")
    ax.legend(loc="center right")
    ax.grid(True, alpha=0.3)
    fig.savefig(path, dpi=FIGURE_DPI, bbox_inches="tight")
    plt.close(fig)
