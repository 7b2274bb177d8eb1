"""From-scratch ML classifiers over per-observation feature vectors.

Decision tree (CART with Gini impurity), random forest (bootstrap + random
feature subsets, majority over trees), and a linear SVM trained by seeded
stochastic subgradient descent on the hinge loss. Labels are encoded 1=indoor,
0=outdoor throughout; every tie resolves to indoor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import EmptyEpoch, EmptyTrainingSet, OneClassOnly
from .features import apply_normalizer, epoch_matrix, Normalizer
from .ingest import Epoch
from .types import FeatureMode, Label, MethodTag, PredictionTrace, WifiEpochFeatures, majority_label

INDOOR_CODE = 1
OUTDOOR_CODE = 0


def gini_impurity(n_indoor: int, n_outdoor: int) -> float:
    """Binary Gini impurity from class counts; 0 iff the node is pure."""
    n = n_indoor + n_outdoor
    if n == 0:
        return 0.0
    p_in = n_indoor / n
    p_out = n_outdoor / n
    return 1.0 - p_in * p_in - p_out * p_out


@dataclass(frozen=True)
class TreeHyperparams:
    max_depth: int = 12
    min_leaf_size: int = 5


@dataclass(frozen=True)
class ForestHyperparams:
    n_trees: int = 100
    features_per_split: Optional[int] = None  # None => ceil(sqrt(n_features))
    bootstrap: bool = True
    seed: int = 0
    tree: TreeHyperparams = field(default_factory=TreeHyperparams)


@dataclass(frozen=True)
class SvmHyperparams:
    regularization: float = 1e-4
    epochs: int = 30
    seed: int = 0
    # None selects the standard 1/(lambda*t) schedule; a float eta0 selects
    # eta0 / (1 + lambda*t), useful for small-step convergence checks.
    learning_rate: Optional[float] = None


@dataclass
class DecisionTreeModel:
    """CART tree stored as parallel node arrays; feature == -1 marks a leaf."""

    feature: list[int]
    split: list[float]
    left: list[int]
    right: list[int]
    label: list[int]
    n_indoor: list[int]
    n_outdoor: list[int]
    max_depth: int
    min_leaf_size: int

    @property
    def method_tag(self) -> MethodTag:
        return MethodTag.DT

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict_matrix(self, x: np.ndarray) -> np.ndarray:
        """Vectorized prediction: walk all rows down the tree one level at a time."""
        feature = np.asarray(self.feature, dtype=np.int64)
        split = np.asarray(self.split, dtype=np.float64)
        left = np.asarray(self.left, dtype=np.int64)
        right = np.asarray(self.right, dtype=np.int64)
        label = np.asarray(self.label, dtype=np.int8)

        node = np.zeros(x.shape[0], dtype=np.int64)
        for _ in range(self.max_depth + 1):
            internal = feature[node] >= 0
            if not internal.any():
                break
            rows = np.nonzero(internal)[0]
            cur = node[rows]
            goes_left = x[rows, feature[cur]] <= split[cur]
            node[rows] = np.where(goes_left, left[cur], right[cur])
        return label[node]


def _best_split_for_feature(
    values: np.ndarray, y: np.ndarray, parent_gini: float, min_leaf: int
) -> tuple[float, float] | None:
    """Best (gain, split_value) for one feature, or None when no admissible split.

    Candidates are midpoints between consecutive distinct sorted values; both
    children must keep at least min_leaf samples. Ties go to the smallest split
    value (candidates are scanned in ascending order).
    """
    order = np.argsort(values, kind="stable")
    sv = values[order]
    sy = y[order]
    n = sv.size

    boundary = np.nonzero(sv[1:] != sv[:-1])[0]
    if boundary.size == 0:
        return None
    n_left = boundary + 1
    n_right = n - n_left
    admissible = (n_left >= min_leaf) & (n_right >= min_leaf)
    if not admissible.any():
        return None
    boundary = boundary[admissible]
    n_left = n_left[admissible]
    n_right = n_right[admissible]

    cum_indoor = np.cumsum(sy, dtype=np.int64)
    in_left = cum_indoor[boundary]
    in_total = int(cum_indoor[-1])
    in_right = in_total - in_left

    p_in_l = in_left / n_left
    p_out_l = (n_left - in_left) / n_left
    gini_l = 1.0 - p_in_l * p_in_l - p_out_l * p_out_l
    p_in_r = in_right / n_right
    p_out_r = (n_right - in_right) / n_right
    gini_r = 1.0 - p_in_r * p_in_r - p_out_r * p_out_r
    gain = parent_gini - (n_left / n) * gini_l - (n_right / n) * gini_r

    best = int(np.argmax(gain))
    i = int(boundary[best])
    split_value = (sv[i] + sv[i + 1]) / 2.0
    return float(gain[best]), float(split_value)


class _TreeBuilder:
    def __init__(
        self,
        x: np.ndarray,
        y: np.ndarray,
        hp: TreeHyperparams,
        rng: Optional[np.random.Generator] = None,
        features_per_split: Optional[int] = None,
    ):
        self.x = x
        self.y = y
        self.hp = hp
        self.rng = rng
        self.n_features = x.shape[1]
        k = features_per_split
        # Sampling every feature is the same as no sampling; skip the rng so a
        # degenerate forest tree is bit-identical to a plain tree.
        self.features_per_split = None if k is None or k >= self.n_features else k
        self.feature: list[int] = []
        self.split: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.label: list[int] = []
        self.n_indoor: list[int] = []
        self.n_outdoor: list[int] = []

    def _candidate_features(self) -> np.ndarray:
        if self.features_per_split is None:
            return np.arange(self.n_features)
        chosen = self.rng.choice(self.n_features, size=self.features_per_split, replace=False)
        return np.sort(chosen)

    def _new_node(self, n_in: int, n_out: int) -> int:
        node_id = len(self.feature)
        self.feature.append(-1)
        self.split.append(math.nan)
        self.left.append(-1)
        self.right.append(-1)
        self.label.append(INDOOR_CODE if n_in >= n_out else OUTDOOR_CODE)
        self.n_indoor.append(n_in)
        self.n_outdoor.append(n_out)
        return node_id

    def grow(self, idx: np.ndarray, depth: int) -> int:
        y_node = self.y[idx]
        n_in = int(y_node.sum())
        n_out = int(idx.size - n_in)
        node_id = self._new_node(n_in, n_out)

        if n_in == 0 or n_out == 0 or depth >= self.hp.max_depth:
            return node_id
        if idx.size < 2 * self.hp.min_leaf_size:
            return node_id

        parent_gini = gini_impurity(n_in, n_out)
        best_gain = 0.0
        best_feature = -1
        best_split = math.nan
        for f in self._candidate_features():
            found = _best_split_for_feature(
                self.x[idx, f], y_node, parent_gini, self.hp.min_leaf_size
            )
            if found is None:
                continue
            gain, split_value = found
            if gain > best_gain:
                best_gain, best_feature, best_split = gain, int(f), split_value
        if best_feature < 0:
            return node_id

        goes_left = self.x[idx, best_feature] <= best_split
        self.feature[node_id] = best_feature
        self.split[node_id] = best_split
        self.left[node_id] = self.grow(idx[goes_left], depth + 1)
        self.right[node_id] = self.grow(idx[~goes_left], depth + 1)
        return node_id

    def build(self) -> DecisionTreeModel:
        self.grow(np.arange(self.x.shape[0]), depth=0)
        return DecisionTreeModel(
            feature=self.feature,
            split=self.split,
            left=self.left,
            right=self.right,
            label=self.label,
            n_indoor=self.n_indoor,
            n_outdoor=self.n_outdoor,
            max_depth=self.hp.max_depth,
            min_leaf_size=self.hp.min_leaf_size,
        )


def train_tree(
    x: np.ndarray, y: np.ndarray, hyperparams: TreeHyperparams = TreeHyperparams()
) -> DecisionTreeModel:
    """Greedy CART on (n_samples, n_features) data with 0/1 labels."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int8)
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptyTrainingSet("tree training needs at least one sample")
    return _TreeBuilder(x, y, hyperparams).build()


@dataclass
class RandomForestModel:
    trees: list[DecisionTreeModel]
    n_trees: int
    features_per_split: int
    bootstrap: bool
    bootstrap_seed: int

    @property
    def method_tag(self) -> MethodTag:
        return MethodTag.RF

    def predict_matrix(self, x: np.ndarray) -> np.ndarray:
        votes = np.zeros(x.shape[0], dtype=np.int64)
        for tree in self.trees:
            votes += tree.predict_matrix(x)
        # Indoor wins ties, matching the epoch-level vote rule.
        return (2 * votes >= len(self.trees)).astype(np.int8)


def train_forest(
    x: np.ndarray, y: np.ndarray, hyperparams: ForestHyperparams = ForestHyperparams()
) -> RandomForestModel:
    """Bootstrap-aggregated CART trees with per-split random feature subsets.

    Each tree gets its own generator spawned from the master seed, so serial and
    parallel builds produce bit-identical forests.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int8)
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptyTrainingSet("forest training needs at least one sample")
    n, d = x.shape
    k = hyperparams.features_per_split
    if k is None:
        k = math.ceil(math.sqrt(d))
    k = min(k, d)

    trees = []
    for child_seq in np.random.SeedSequence(hyperparams.seed).spawn(hyperparams.n_trees):
        rng = np.random.default_rng(child_seq)
        idx = rng.integers(0, n, size=n) if hyperparams.bootstrap else np.arange(n)
        builder = _TreeBuilder(
            x[idx], y[idx], hyperparams.tree, rng=rng, features_per_split=k
        )
        trees.append(builder.build())
    return RandomForestModel(
        trees=trees,
        n_trees=hyperparams.n_trees,
        features_per_split=k,
        bootstrap=hyperparams.bootstrap,
        bootstrap_seed=hyperparams.seed,
    )


@dataclass
class LinearSvmModel:
    """Linear decision rule sign(w.x + b); nonnegative scores map to indoor."""

    weights: np.ndarray
    bias: float
    regularization: float
    epochs_trained: int

    @property
    def method_tag(self) -> MethodTag:
        return MethodTag.SVM

    def decision_values(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights + self.bias

    def predict_matrix(self, x: np.ndarray) -> np.ndarray:
        return (self.decision_values(x) >= 0.0).astype(np.int8)


def svm_objective(
    weights: np.ndarray, bias: float, x: np.ndarray, y_signed: np.ndarray, regularization: float
) -> float:
    """Regularized hinge objective; the bias is regularized like a weight."""
    margins = y_signed * (x @ weights + bias)
    hinge = np.maximum(0.0, 1.0 - margins).mean()
    return 0.5 * regularization * (float(weights @ weights) + bias * bias) + float(hinge)


def train_svm(
    x: np.ndarray, y: np.ndarray, hyperparams: SvmHyperparams = SvmHyperparams()
) -> LinearSvmModel:
    """Hinge-loss + L2 minimization by seeded stochastic subgradient descent.

    Sample order is reshuffled every epoch from the seed, so training is fully
    deterministic. The bias rides along as a regularized extra coordinate, and
    the returned model is the average of the final half of the iterates, which
    stabilizes the stochastic endpoint.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int8)
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptyTrainingSet("SVM training needs at least one sample")
    classes = np.unique(y)
    if classes.size < 2:
        raise OneClassOnly("SVM training needs both classes")

    n, d = x.shape
    lam = hyperparams.regularization
    y_signed = np.where(y == INDOOR_CODE, 1.0, -1.0)
    w = np.zeros(d, dtype=np.float64)
    b = 0.0
    rng = np.random.default_rng(hyperparams.seed)
    total_steps = hyperparams.epochs * n
    average_after = total_steps // 2
    w_sum = np.zeros(d, dtype=np.float64)
    b_sum = 0.0
    n_averaged = 0
    t = 0
    for _ in range(hyperparams.epochs):
        for i in rng.permutation(n):
            t += 1
            if hyperparams.learning_rate is None:
                eta = 1.0 / (lam * t)
            else:
                eta = hyperparams.learning_rate / (1.0 + lam * t)
            xi = x[i]
            yi = y_signed[i]
            decay = 1.0 - eta * lam
            if yi * (xi @ w + b) < 1.0:
                w = decay * w + (eta * yi) * xi
                b = decay * b + eta * yi
            else:
                w = decay * w
                b = decay * b
            if t > average_after:
                w_sum += w
                b_sum += b
                n_averaged += 1
    return LinearSvmModel(
        weights=w_sum / n_averaged,
        bias=float(b_sum / n_averaged),
        regularization=lam,
        epochs_trained=hyperparams.epochs,
    )


def predict_epoch_ml(
    model,
    epoch: Epoch,
    normalizer: Normalizer,
    feature_mode: FeatureMode,
    wifi: Optional[WifiEpochFeatures] = None,
) -> PredictionTrace:
    """Per-observation predictions over one epoch, aggregated by majority vote.

    Ties resolve to indoor. In Wi-Fi-only mode the epoch contributes a single
    vote from its aggregated Wi-Fi features.
    """
    if not epoch.observations and feature_mode is not FeatureMode.WIFI_ONLY:
        raise EmptyEpoch(f"epoch at {epoch.timestamp_ms} has no observations")
    matrix = apply_normalizer(normalizer, epoch_matrix(epoch, feature_mode, wifi=wifi))
    codes = model.predict_matrix(matrix)
    votes = tuple(Label.INDOOR if c == INDOOR_CODE else Label.OUTDOOR for c in codes)
    return PredictionTrace(
        epoch_timestamp_ms=epoch.timestamp_ms,
        votes=votes,
        final_label=majority_label(votes),
        prior_applied=False,
        method=model.method_tag,
    )
