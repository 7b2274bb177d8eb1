import math

import numpy as np
import pytest

from gnssio.errors import EmptyEpoch, EmptyTrainingSet, OneClassOnly
from gnssio.features import Normalizer
from gnssio.ml import (
    DecisionTreeModel,
    ForestHyperparams,
    SvmHyperparams,
    TreeHyperparams,
    gini_impurity,
    predict_epoch_ml,
    svm_objective,
    train_forest,
    train_svm,
    train_tree,
)
from gnssio.types import FeatureMode, Label

from conftest import make_epoch


# Exhaustive split search over every (feature, midpoint) pair, written with
# plain Python loops so it shares nothing with the tree builder but the
# definitions: Gini gain, ascending scan order, strict improvement.
def oracle_root_split(x, y, min_leaf=1):
    n, d = x.shape
    n_in = int(y.sum())
    n_out = n - n_in
    p_in = n_in / n
    p_out = n_out / n
    parent = 1.0 - p_in * p_in - p_out * p_out
    best_gain, best = 0.0, None
    for f in range(d):
        vals = sorted({float(v) for v in x[:, f]})
        for a, b in zip(vals, vals[1:]):
            s = (a + b) / 2.0
            left = [i for i in range(n) if x[i, f] <= s]
            n_l = len(left)
            n_r = n - n_l
            if n_l < min_leaf or n_r < min_leaf:
                continue
            in_l = sum(int(y[i]) for i in left)
            in_r = n_in - in_l
            p_in_l = in_l / n_l
            p_out_l = (n_l - in_l) / n_l
            gini_l = 1.0 - p_in_l * p_in_l - p_out_l * p_out_l
            p_in_r = in_r / n_r
            p_out_r = (n_r - in_r) / n_r
            gini_r = 1.0 - p_in_r * p_in_r - p_out_r * p_out_r
            gain = parent - (n_l / n) * gini_l - (n_r / n) * gini_r
            if gain > best_gain:
                best_gain, best = gain, (f, s)
    return best


class TestGini:
    def test_balanced_is_half(self):
        assert gini_impurity(2, 2) == 0.5

    def test_pure_is_zero(self):
        assert gini_impurity(5, 0) == 0.0
        assert gini_impurity(0, 3) == 0.0

    def test_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a, b = int(rng.integers(0, 50)), int(rng.integers(0, 50))
            if a + b == 0:
                continue
            g = gini_impurity(a, b)
            assert 0.0 <= g <= 0.5
            assert (g == 0.0) == (a == 0 or b == 0)


class TestTree:
    def test_pure_root_is_single_leaf(self):
        x = np.array([[1.0], [2.0], [3.0]])
        y = np.array([1, 1, 1])
        tree = train_tree(x, y)
        assert tree.n_nodes == 1
        assert tree.feature == [-1]
        assert tree.predict_matrix(np.array([[9.0]])).tolist() == [1]

    def test_1d_separable_depth_one(self):
        x = np.array([[12.0], [15.0], [18.0], [25.0], [30.0], [35.0]])
        y = np.array([1, 1, 1, 0, 0, 0])  # indoor below 20, outdoor above
        tree = train_tree(x, y, TreeHyperparams(max_depth=8, min_leaf_size=1))
        assert tree.n_nodes == 3  # one split, two leaves
        assert tree.split[0] == pytest.approx((18.0 + 25.0) / 2.0)
        assert tree.predict_matrix(x).tolist() == y.tolist()

    def test_root_split_matches_exhaustive_search(self):
        rng = np.random.default_rng(123)
        for _ in range(200):
            n = int(rng.integers(2, 13))
            d = int(rng.integers(1, 3))
            x = np.round(rng.uniform(0, 10, size=(n, d)), 2)
            y = rng.integers(0, 2, size=n).astype(np.int8)
            tree = train_tree(x, y, TreeHyperparams(max_depth=1, min_leaf_size=1))
            expected = oracle_root_split(x, y, min_leaf=1)
            if expected is None:
                assert tree.n_nodes == 1
            else:
                assert tree.feature[0] == expected[0]
                assert tree.split[0] == expected[1]

    def test_min_leaf_respected(self):
        x = np.arange(10, dtype=np.float64).reshape(-1, 1)
        y = np.array([1, 1, 1, 1, 1, 0, 0, 0, 0, 0])
        tree = train_tree(x, y, TreeHyperparams(max_depth=8, min_leaf_size=3))
        for i in range(tree.n_nodes):
            if tree.feature[i] == -1 and tree.n_indoor[i] and tree.n_outdoor[i]:
                assert tree.n_indoor[i] + tree.n_outdoor[i] >= 3

    def test_max_depth_zero_is_majority_stump(self):
        x = np.array([[1.0], [2.0], [3.0]])
        y = np.array([1, 0, 0])
        tree = train_tree(x, y, TreeHyperparams(max_depth=0, min_leaf_size=1))
        assert tree.n_nodes == 1
        assert tree.label == [0]

    def test_empty_training_set(self):
        with pytest.raises(EmptyTrainingSet):
            train_tree(np.empty((0, 2)), np.empty(0))


class TestForest:
    def test_degenerate_forest_equals_tree(self):
        rng = np.random.default_rng(7)
        x = rng.uniform(0, 1, size=(60, 5))
        y = ((x[:, 0] + 0.3 * rng.standard_normal(60)) > 0.5).astype(np.int8)
        hp = TreeHyperparams(max_depth=6, min_leaf_size=2)
        tree = train_tree(x, y, hp)
        forest = train_forest(
            x, y, ForestHyperparams(n_trees=1, features_per_split=5, bootstrap=False, tree=hp)
        )
        probe = rng.uniform(-0.2, 1.2, size=(1000, 5))
        assert np.array_equal(tree.predict_matrix(probe), forest.predict_matrix(probe))

    def test_fixed_seed_reproducible(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(0, 1, size=(80, 4))
        y = (x[:, 1] > 0.4).astype(np.int8)
        hp = ForestHyperparams(n_trees=7, seed=99, tree=TreeHyperparams(max_depth=5))
        f1 = train_forest(x, y, hp)
        f2 = train_forest(x, y, hp)
        for t1, t2 in zip(f1.trees, f2.trees):
            assert t1.feature == t2.feature
            assert t1.split == t2.split
            assert t1.label == t2.label

    def test_different_seeds_differ(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(0, 1, size=(80, 4))
        y = (x[:, 1] + 0.2 * rng.standard_normal(80) > 0.4).astype(np.int8)
        f1 = train_forest(x, y, ForestHyperparams(n_trees=5, seed=1))
        f2 = train_forest(x, y, ForestHyperparams(n_trees=5, seed=2))
        assert any(t1.split != t2.split for t1, t2 in zip(f1.trees, f2.trees))

    def test_noisy_data_reasonable_accuracy(self):
        rng = np.random.default_rng(42)

        def sample(n):
            x = rng.uniform(0, 1, size=(n, 6))
            y = ((x[:, 0] + x[:, 1] + 0.25 * rng.standard_normal(n)) > 1.0).astype(np.int8)
            return x, y

        x_train, y_train = sample(400)
        x_test, y_test = sample(400)
        forest = train_forest(x_train, y_train, ForestHyperparams(n_trees=50, seed=0))
        train_acc = float((forest.predict_matrix(x_train) == y_train).mean())
        test_acc = float((forest.predict_matrix(x_test) == y_test).mean())
        assert 0.0 <= test_acc <= train_acc <= 1.0
        assert test_acc >= 0.75


class TestSvm:
    def test_separable_1d(self):
        x = np.array([[-1.0], [-0.8], [-1.2], [1.0], [0.8], [1.2]])
        y = np.array([1, 1, 1, 0, 0, 0])  # indoor on the negative side
        model = train_svm(x, y, SvmHyperparams(regularization=1e-3, epochs=50, seed=0))
        assert model.weights[0] < 0  # negative scores... weight points away from outdoor
        assert model.predict_matrix(x).tolist() == y.tolist()

    def test_identical_features_predict_majority(self):
        x = np.ones((10, 3))
        y = np.array([1, 1, 1, 1, 1, 1, 1, 0, 0, 0])
        model = train_svm(x, y, SvmHyperparams(epochs=20, seed=1))
        assert model.predict_matrix(np.ones((4, 3))).tolist() == [1, 1, 1, 1]

    def test_huge_regularization_collapses_to_majority(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(0, 1, size=(30, 4))
        y = np.array([0] * 20 + [1] * 10)
        model = train_svm(x, y, SvmHyperparams(regularization=1e6, epochs=10, seed=0))
        assert float(np.abs(model.weights).max()) < 1e-3
        preds = model.predict_matrix(rng.uniform(0, 1, size=(50, 4)))
        assert preds.tolist() == [0] * 50

    def test_one_class_rejected(self):
        with pytest.raises(OneClassOnly):
            train_svm(np.ones((5, 2)), np.ones(5))

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        x = rng.uniform(0, 1, size=(40, 3))
        y = (x[:, 0] > 0.5).astype(np.int8)
        hp = SvmHyperparams(epochs=10, seed=17)
        m1, m2 = train_svm(x, y, hp), train_svm(x, y, hp)
        assert np.array_equal(m1.weights, m2.weights)
        assert m1.bias == m2.bias

    def test_loss_nonincreasing_with_small_decaying_steps(self):
        x = np.array([[-1.0, 0.2], [-0.7, -0.1], [-1.1, 0.4], [-0.9, 0.0],
                      [0.8, 0.1], [1.0, -0.3], [1.2, 0.2], [0.9, -0.1]])
        y = np.array([1, 1, 1, 1, 0, 0, 0, 0])
        y_signed = np.where(y == 1, 1.0, -1.0)
        lam = 0.01
        losses = []
        for epochs in range(1, 16):
            hp = SvmHyperparams(regularization=lam, epochs=epochs, seed=0, learning_rate=0.05)
            model = train_svm(x, y, hp)
            losses.append(svm_objective(model.weights, model.bias, x, y_signed, lam))
        for a, b in zip(losses, losses[1:]):
            assert b <= a + 1e-9


def _stub_tree():
    # single split on the raw-CNR column of the GNSS feature block
    nan = math.nan
    return DecisionTreeModel(
        feature=[5, -1, -1],
        split=[0.5, nan, nan],
        left=[1, -1, -1],
        right=[2, -1, -1],
        label=[1, 1, 0],
        n_indoor=[1, 1, 0],
        n_outdoor=[1, 0, 1],
        max_depth=4,
        min_leaf_size=1,
    )


def _identity_normalizer(width=9):
    return Normalizer(mins=np.zeros(width), maxs=np.ones(width))


class TestPredictEpoch:
    def test_majority_outdoor(self):
        epoch = make_epoch([0.9, 0.9, 0.9, 0.2, 0.2])
        trace = predict_epoch_ml(_stub_tree(), epoch, _identity_normalizer(), FeatureMode.GNSS_ONLY)
        assert trace.final_label is Label.OUTDOOR
        assert len(trace.votes) == 5
        assert not trace.prior_applied

    def test_tie_goes_indoor(self):
        epoch = make_epoch([0.2, 0.9])
        trace = predict_epoch_ml(_stub_tree(), epoch, _identity_normalizer(), FeatureMode.GNSS_ONLY)
        assert trace.final_label is Label.INDOOR

    def test_single_observation(self):
        epoch = make_epoch([0.9])
        trace = predict_epoch_ml(_stub_tree(), epoch, _identity_normalizer(), FeatureMode.GNSS_ONLY)
        assert trace.final_label is Label.OUTDOOR
        assert trace.votes == (Label.OUTDOOR,)

    def test_empty_epoch(self):
        from gnssio.ingest import Epoch

        empty = Epoch(timestamp_ms=0, observations=(), mean_cnr=0.0, satellite_count=0)
        with pytest.raises(EmptyEpoch):
            predict_epoch_ml(_stub_tree(), empty, _identity_normalizer(), FeatureMode.GNSS_ONLY)
