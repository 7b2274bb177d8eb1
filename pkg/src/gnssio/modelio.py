"""Versioned structured-text model files with bit-exact round-trips.

One format family covers all four methods. Floats are written with repr() so
they reload to the identical IEEE value; table entries and tree nodes are
emitted in a fixed order so retraining with the same seed reproduces the file
byte for byte.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import ModelSchemaMismatch
from .features import Normalizer, SatelliteKey, feature_order
from .ingest import Epoch
from .ml import (
    DecisionTreeModel,
    LinearSvmModel,
    RandomForestModel,
    predict_epoch_ml,
)
from .threshold import ThresholdEntry, ThresholdTable, predict_epoch_threshold
from .types import Constellation, FeatureMode, MethodTag, PredictionTrace, WifiEpochFeatures

MAGIC = "gnssio-model"
FORMAT_VERSION = 1

MlModel = Union[DecisionTreeModel, RandomForestModel, LinearSvmModel]


@dataclass
class TrainedModel:
    """A ready-to-predict bundle: method tag plus whatever state it needs."""

    method: MethodTag
    feature_mode: FeatureMode
    table: Optional[ThresholdTable] = None
    model: Optional[MlModel] = None
    normalizer: Optional[Normalizer] = None

    def predict_epoch(
        self, epoch: Epoch, wifi: Optional[WifiEpochFeatures] = None
    ) -> PredictionTrace:
        if self.method is MethodTag.THRESHOLD:
            return predict_epoch_threshold(self.table, epoch)
        return predict_epoch_ml(self.model, epoch, self.normalizer, self.feature_mode, wifi=wifi)


def _entry_line(e: ThresholdEntry) -> str:
    k = e.key
    return (
        f"entry: {k.constellation.name} {k.svid} {k.frequency_bucket!r} "
        f"{e.threshold!r} {e.train_accuracy!r} "
        f"{e.n_indoor} {e.n_outdoor} {e.n_indoor_at_or_below} {e.n_outdoor_at_or_below}"
    )


def _fallback_line(e: ThresholdEntry) -> str:
    return (
        f"fallback: {e.threshold!r} {e.train_accuracy!r} "
        f"{e.n_indoor} {e.n_outdoor} {e.n_indoor_at_or_below} {e.n_outdoor_at_or_below}"
    )


def _node_lines(tree: DecisionTreeModel) -> list[str]:
    lines = []
    for i in range(tree.n_nodes):
        lines.append(
            f"node: {tree.feature[i]} {tree.split[i]!r} {tree.left[i]} {tree.right[i]} "
            f"{tree.label[i]} {tree.n_indoor[i]} {tree.n_outdoor[i]}"
        )
    return lines


def _floats_csv(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def save_model(bundle: TrainedModel, path: Path | str) -> None:
    lines = [f"{MAGIC} {FORMAT_VERSION}", f"method: {bundle.method.value}",
             f"feature_mode: {bundle.feature_mode.value}"]

    if bundle.method is MethodTag.THRESHOLD:
        table = bundle.table
        lines.append(f"grid_policy: {table.grid_policy}")
        lines.append(f"sat_count_prior: {table.sat_count_prior}")
        lines.append(f"min_samples_per_key: {table.min_samples_per_key}")
        lines.append(_fallback_line(table.fallback_entry))
        lines.append(f"n_entries: {len(table.entries)}")
        for key in sorted(table.entries, key=SatelliteKey.sort_key):
            lines.append(_entry_line(table.entries[key]))
    else:
        lines.append(f"feature_order: {','.join(feature_order(bundle.feature_mode))}")
        lines.append(f"normalizer_min: {_floats_csv(bundle.normalizer.mins)}")
        lines.append(f"normalizer_max: {_floats_csv(bundle.normalizer.maxs)}")
        model = bundle.model
        if bundle.method is MethodTag.DT:
            lines.append(f"max_depth: {model.max_depth}")
            lines.append(f"min_leaf_size: {model.min_leaf_size}")
            lines.append(f"n_nodes: {model.n_nodes}")
            lines.extend(_node_lines(model))
        elif bundle.method is MethodTag.RF:
            first = model.trees[0]
            lines.append(f"n_trees: {model.n_trees}")
            lines.append(f"features_per_split: {model.features_per_split}")
            lines.append(f"bootstrap: {int(model.bootstrap)}")
            lines.append(f"bootstrap_seed: {model.bootstrap_seed}")
            lines.append(f"max_depth: {first.max_depth}")
            lines.append(f"min_leaf_size: {first.min_leaf_size}")
            for i, tree in enumerate(model.trees):
                lines.append(f"tree: {i} {tree.n_nodes}")
                lines.extend(_node_lines(tree))
        elif bundle.method is MethodTag.SVM:
            lines.append(f"regularization: {float(model.regularization)!r}")
            lines.append(f"epochs_trained: {model.epochs_trained}")
            lines.append(f"bias: {float(model.bias)!r}")
            lines.append(f"weights: {_floats_csv(model.weights)}")
        else:
            raise ModelSchemaMismatch(f"cannot serialize method {bundle.method}")

    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class _LineReader:
    def __init__(self, path: Path, lines: list[str]):
        self.path = path
        self.lines = lines
        self.pos = 0

    def next_field(self, key: str) -> str:
        if self.pos >= len(self.lines):
            raise ModelSchemaMismatch(f"{self.path}: unexpected end of file, wanted {key!r}")
        line = self.lines[self.pos]
        self.pos += 1
        prefix = f"{key}: "
        if not line.startswith(prefix):
            raise ModelSchemaMismatch(f"{self.path}: expected {key!r}, got {line!r}")
        return line[len(prefix):]


def _parse_entry_fields(text: str, path: Path, with_key: bool) -> ThresholdEntry:
    parts = text.split()
    try:
        if with_key:
            key = SatelliteKey(
                constellation=Constellation[parts[0]],
                svid=int(parts[1]),
                frequency_bucket=float(parts[2]),
            )
            rest = parts[3:]
        else:
            key = None
            rest = parts
        threshold, accuracy = float(rest[0]), float(rest[1])
        n_in, n_out, n_in_le, n_out_le = (int(v) for v in rest[2:6])
    except (KeyError, ValueError, IndexError) as exc:
        raise ModelSchemaMismatch(f"{path}: bad entry line: {text!r} ({exc})") from None
    return ThresholdEntry(
        key=key,
        threshold=threshold,
        train_accuracy=accuracy,
        n_indoor=n_in,
        n_outdoor=n_out,
        n_indoor_at_or_below=n_in_le,
        n_outdoor_at_or_below=n_out_le,
    )


def _parse_nodes(reader: _LineReader, n_nodes: int, max_depth: int, min_leaf: int) -> DecisionTreeModel:
    tree = DecisionTreeModel(
        feature=[], split=[], left=[], right=[], label=[], n_indoor=[], n_outdoor=[],
        max_depth=max_depth, min_leaf_size=min_leaf,
    )
    for _ in range(n_nodes):
        parts = reader.next_field("node").split()
        try:
            tree.feature.append(int(parts[0]))
            tree.split.append(float(parts[1]))
            tree.left.append(int(parts[2]))
            tree.right.append(int(parts[3]))
            tree.label.append(int(parts[4]))
            tree.n_indoor.append(int(parts[5]))
            tree.n_outdoor.append(int(parts[6]))
        except (ValueError, IndexError) as exc:
            raise ModelSchemaMismatch(f"{reader.path}: bad node line ({exc})") from None
    return tree


def load_model(path: Path | str) -> TrainedModel:
    """Load any model file; raises ModelSchemaMismatch on version, structure, or
    feature-order problems."""
    path = Path(path)
    raw = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not raw:
        raise ModelSchemaMismatch(f"{path}: empty model file")
    magic = raw[0].split()
    if len(magic) != 2 or magic[0] != MAGIC:
        raise ModelSchemaMismatch(f"{path}: not a {MAGIC} file")
    if magic[1] != str(FORMAT_VERSION):
        raise ModelSchemaMismatch(f"{path}: unsupported format version {magic[1]}")

    reader = _LineReader(path, raw[1:])
    try:
        return _load_body(path, reader)
    except (ValueError, IndexError) as exc:
        raise ModelSchemaMismatch(f"{path}: malformed model file ({exc})") from None


def _load_body(path: Path, reader: _LineReader) -> TrainedModel:
    try:
        method = MethodTag(reader.next_field("method"))
        mode = FeatureMode(reader.next_field("feature_mode"))
    except ValueError as exc:
        raise ModelSchemaMismatch(f"{path}: {exc}") from None

    if method is MethodTag.THRESHOLD:
        table = ThresholdTable()
        table.grid_policy = reader.next_field("grid_policy")
        table.sat_count_prior = int(reader.next_field("sat_count_prior"))
        table.min_samples_per_key = int(reader.next_field("min_samples_per_key"))
        table.fallback_entry = _parse_entry_fields(reader.next_field("fallback"), path, with_key=False)
        table.mean_cnr_fallback_threshold = table.fallback_entry.threshold
        n_entries = int(reader.next_field("n_entries"))
        for _ in range(n_entries):
            entry = _parse_entry_fields(reader.next_field("entry"), path, with_key=True)
            table.entries[entry.key] = entry
        return TrainedModel(method=method, feature_mode=mode, table=table)

    stored_order = tuple(reader.next_field("feature_order").split(","))
    expected = feature_order(mode)
    if stored_order != expected:
        raise ModelSchemaMismatch(
            f"{path}: feature order {stored_order} does not match the "
            f"{mode.value} order {expected}"
        )
    mins = np.array([float(v) for v in reader.next_field("normalizer_min").split(",")])
    maxs = np.array([float(v) for v in reader.next_field("normalizer_max").split(",")])
    if mins.shape != maxs.shape or mins.shape[0] != len(expected):
        raise ModelSchemaMismatch(f"{path}: normalizer size does not match feature order")
    normalizer = Normalizer(mins=mins, maxs=maxs)

    if method is MethodTag.DT:
        max_depth = int(reader.next_field("max_depth"))
        min_leaf = int(reader.next_field("min_leaf_size"))
        n_nodes = int(reader.next_field("n_nodes"))
        model: MlModel = _parse_nodes(reader, n_nodes, max_depth, min_leaf)
    elif method is MethodTag.RF:
        n_trees = int(reader.next_field("n_trees"))
        k = int(reader.next_field("features_per_split"))
        bootstrap = bool(int(reader.next_field("bootstrap")))
        seed = int(reader.next_field("bootstrap_seed"))
        max_depth = int(reader.next_field("max_depth"))
        min_leaf = int(reader.next_field("min_leaf_size"))
        trees = []
        for i in range(n_trees):
            head = reader.next_field("tree").split()
            if int(head[0]) != i:
                raise ModelSchemaMismatch(f"{path}: tree index mismatch at {head}")
            trees.append(_parse_nodes(reader, int(head[1]), max_depth, min_leaf))
        model = RandomForestModel(
            trees=trees, n_trees=n_trees, features_per_split=k,
            bootstrap=bootstrap, bootstrap_seed=seed,
        )
    elif method is MethodTag.SVM:
        regularization = float(reader.next_field("regularization"))
        epochs_trained = int(reader.next_field("epochs_trained"))
        bias = float(reader.next_field("bias"))
        weights = np.array([float(v) for v in reader.next_field("weights").split(",")])
        if weights.shape[0] != len(expected):
            raise ModelSchemaMismatch(f"{path}: weight count does not match feature order")
        model = LinearSvmModel(
            weights=weights, bias=bias, regularization=regularization,
            epochs_trained=epochs_trained,
        )
    else:  # pragma: no cover - MethodTag is closed
        raise ModelSchemaMismatch(f"{path}: unsupported method {method}")

    if reader.pos != len(reader.lines):
        raise ModelSchemaMismatch(f"{path}: trailing content after model body")
    return TrainedModel(method=method, feature_mode=mode, model=model, normalizer=normalizer)
