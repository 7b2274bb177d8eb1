"""Aggregate per-epoch predictions into fixed-length tumbling windows."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import InvalidConfig
from .types import Label, PredictionTrace, majority_label

EPOCH_PERIOD_S = 5


@dataclass(frozen=True)
class WindowConfig:
    """Tumbling windows of window_seconds, anchored at the first trace timestamp.

    window_seconds must be a positive multiple of the 5 s epoch period. Only
    the tumbling (non-overlapping) policy exists.
    """

    window_seconds: int
    policy: str = "tumbling"
    tie_rule: Label = Label.INDOOR

    def __post_init__(self):
        if self.window_seconds <= 0 or self.window_seconds % EPOCH_PERIOD_S != 0:
            raise InvalidConfig(
                f"window_seconds must be a positive multiple of {EPOCH_PERIOD_S}, "
                f"got {self.window_seconds}"
            )
        if self.policy != "tumbling":
            raise InvalidConfig(f"unsupported window policy {self.policy!r}")


def aggregate_window(
    traces: Sequence[PredictionTrace], cfg: WindowConfig
) -> list[tuple[int, Label]]:
    """Majority-vote epoch labels within consecutive elapsed-time windows.

    Window k spans [t0 + k*W, t0 + (k+1)*W) where t0 is the first trace's
    timestamp; missing epochs never shift the boundaries. Only windows holding
    at least one trace are returned; the final window may be partial. A tied
    window resolves to cfg.tie_rule.
    """
    if not traces:
        return []
    t0 = traces[0].epoch_timestamp_ms
    width_ms = cfg.window_seconds * 1000
    out: list[tuple[int, Label]] = []
    current_index = 0
    current_labels: list[Label] = []
    for trace in traces:
        k = (trace.epoch_timestamp_ms - t0) // width_ms
        if k != current_index and current_labels:
            out.append((current_index, majority_label(current_labels, cfg.tie_rule)))
            current_labels = []
        current_index = k
        current_labels.append(trace.final_label)
    if current_labels:
        out.append((current_index, majority_label(current_labels, cfg.tie_rule)))
    return out
