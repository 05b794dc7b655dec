import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from armorbench.attacks import AttackConfig, generate_attacks
from armorbench.detectors import (
    DETECTOR_KINDS,
    LEAF_WISE,
    LEVEL_WISE,
    DecisionTree,
    FeatureSet,
    detection_task,
    evaluate_detector,
    extract_features,
    feature_set_from_attacks,
    load_detector,
    predict,
    predict_proba,
    save_detector,
    sensitivity_sweep,
    split_features,
    train_adaboost,
    train_detector,
    train_detectors,
    train_gbdt,
    train_mlp,
    write_sweep_csv,
)
from armorbench.detectors.adaboost import samme_alpha
from armorbench.detectors.base import resolve_params
from armorbench.detectors.mlp import init_mlp
from armorbench.detectors.trees import best_gain_split, grow_error_tree, grow_gradient_tree
from armorbench.errors import ConfigError, InvalidInputError, ShapeError

SMALL_PARAMS = {
    "adaboost": {"rounds": 10},
    "gbdt_level": {"trees": 10, "max_depth": 2},
    "gbdt_leaf": {"trees": 10, "max_leaves": 4},
    "mlp": {"epochs": 40, "hidden": 16},
}


def blobs(n_per_class=30, k=3, d=4, seed=0, spread=0.3):
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=3.0, size=(k, d))
    X = np.concatenate([c + spread * rng.normal(size=(n_per_class, d)) for c in centers])
    y = np.repeat(np.arange(k), n_per_class)
    return X, y


def feature_set(X, y, num_classes=None):
    n = len(y)
    return FeatureSet(
        features=X,
        raw=X,
        labels=np.asarray(y),
        adv_flags=np.zeros(n, dtype=bool),
        ids=np.arange(n),
        tags=("clean",) * n,
        norm_mean=np.zeros(X.shape[1]),
        norm_std=np.ones(X.shape[1]),
        num_classes=num_classes or int(np.max(y)) + 1,
    )


# Trees

@given(st.integers(0, 10_000))
def test_error_stump_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 4, size=(8, 2)).astype(float)
    y = rng.integers(0, 2, size=8)
    w = rng.uniform(0.1, 1.0, size=8)
    w /= w.sum()

    def side_error(mask):
        per_class = np.bincount(y[mask], weights=w[mask], minlength=2)
        return per_class.sum() - per_class.max()

    best = side_error(np.ones(8, dtype=bool))
    for f in range(2):
        values = np.unique(X[:, f])
        for lo, hi in zip(values[:-1], values[1:]):
            left = X[:, f] <= (lo + hi) / 2
            best = min(best, side_error(left) + side_error(~left))

    tree = grow_error_tree(X, y, w, 2, max_depth=1)
    error = w[tree.predict(X).astype(int) != y].sum()
    assert error == pytest.approx(best, abs=1e-12)
    assert tree.n_leaves in (1, 2)


def test_gain_split_ties_go_to_lowest_feature():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    g = np.array([-1.0, -1.0, 1.0, 1.0])
    split = best_gain_split(X, np.arange(4), g, np.ones(4), lam=1.0, gamma=0.0, min_samples=1)
    assert split.feature == 0
    assert split.threshold == 1.5
    assert list(split.left) == [0, 1] and list(split.right) == [2, 3]
    # gain = 1/2 (4/3 + 4/3 - 0)
    assert split.score == pytest.approx(4.0 / 3.0)


def test_gain_split_respects_gamma_and_min_samples():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    g = np.array([-1.0, -1.0, 1.0, 1.0])
    assert best_gain_split(X, np.arange(4), g, np.ones(4), 1.0, gamma=2.0, min_samples=1) is None
    assert best_gain_split(X, np.arange(4), g, np.ones(4), 1.0, gamma=0.0, min_samples=3) is None


def test_one_level_and_two_leaves_grow_the_same_tree():
    X, y = blobs(k=2, seed=3)
    g = np.where(y == 1, -0.5, 0.5)
    h = np.full(len(y), 0.25)
    level, level_values = grow_gradient_tree(X, g, h, LEVEL_WISE, lr=0.1, max_depth=1)
    leaf, leaf_values = grow_gradient_tree(X, g, h, LEAF_WISE, lr=0.1, max_leaves=2)
    assert level.structure() == leaf.structure()
    np.testing.assert_array_equal(level_values, leaf_values)


def test_leaf_wise_always_expands_the_best_leaf():
    X, y = blobs(n_per_class=40, k=3, seed=5, spread=1.5)
    g = np.where(y == 0, -0.6, 0.3) + np.random.default_rng(1).normal(scale=0.05, size=len(y))
    h = np.full(len(y), 0.2)
    tree, values = grow_gradient_tree(X, g, h, LEAF_WISE, lr=1.0, max_leaves=6, min_samples=2)
    assert tree.n_leaves <= 6
    for step in tree.growth_log:
        assert all(step["gain"] >= other for other in step["frontier"])
    np.testing.assert_array_equal(tree.predict(X), values)


def test_level_wise_respects_depth():
    X, y = blobs(seed=6, spread=2.0)
    g = np.where(y == 2, -0.5, 0.5)
    tree, _ = grow_gradient_tree(X, g, np.full(len(y), 0.25), LEVEL_WISE, lr=0.1, max_depth=3)
    assert tree.max_depth <= 3


def test_tree_dict_round_trip():
    X, y = blobs(seed=7)
    tree = grow_error_tree(X, y, np.full(len(y), 1 / len(y)), 3, max_depth=2)
    back = DecisionTree.from_dict(tree.to_dict())
    np.testing.assert_array_equal(back.predict(X), tree.predict(X))
    assert back.structure() == tree.structure()


# AdaBoost

def test_adaboost_stops_after_a_perfect_learner():
    X = np.array([[0.1], [0.2], [0.3], [0.7], [0.8], [0.9]])
    y = np.array([0, 0, 0, 1, 1, 1])
    detector = train_adaboost(X, y, rounds=10)
    ensemble = detector.model
    assert len(ensemble.trees) == 1
    assert ensemble.alphas[0] == pytest.approx(samme_alpha(0.0, 2))
    assert ensemble.halted_at is None
    np.testing.assert_array_equal(detector.predict(X), y)


def test_adaboost_halts_when_no_learner_beats_chance():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([0, 0, 1, 1])
    detector = train_adaboost(X, y, rounds=5)
    assert detector.model.halted_at == 1
    assert detector.model.trees == []
    np.testing.assert_allclose(detector.predict_proba(X), 0.5)


def test_adaboost_weights_stay_normalized():
    X, y = blobs(k=3, seed=2, spread=2.5)
    seen = []
    train_adaboost(X, y, rounds=8, on_round=lambda m, w: seen.append((m, w.sum(), w.min())))
    assert seen
    for m, total, smallest in seen:
        assert total == pytest.approx(1.0)
        assert smallest > 0.0


def test_samme_fits_three_separated_classes():
    rng = np.random.default_rng(0)
    X = np.concatenate([c + 0.3 * rng.normal(size=(20, 1)) for c in (0.0, 5.0, 10.0)])
    y = np.repeat([0, 1, 2], 20)
    detector = train_adaboost(X, y, rounds=30)
    assert np.mean(detector.predict(X) == y) >= 0.9


@pytest.mark.parametrize("seed", range(10))
def test_adaboost_first_round_matches_brute_force_stump(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(30, 2))
    y = np.digitize(X[:, 0] + 0.5 * rng.normal(size=30), [-0.5, 0.5])
    detector = train_adaboost(X, y, rounds=1)
    K = detector.num_classes

    def misses(mask):
        counts = np.bincount(y[mask], minlength=K)
        return counts.sum() - counts.max()

    errors = {}
    for f in range(2):
        values = np.unique(X[:, f])
        for lo, hi in zip(values[:-1], values[1:]):
            threshold = (lo + hi) / 2.0
            left = X[:, f] <= threshold
            errors[(f, threshold)] = misses(left) + misses(~left)
    fewest = min(errors.values())

    stump = detector.model.trees[0]
    assert stump.n_leaves == 2
    assert errors[(int(stump.feature[0]), float(stump.threshold[0]))] == fewest
    assert detector.model.alphas[0] == pytest.approx(samme_alpha(fewest / 30, K), rel=1e-12)


# Gradient boosting

def test_single_leaf_round_is_a_newton_step():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 0, 1])
    detector = train_gbdt(X, y, LEVEL_WISE, {"trees": 1, "max_depth": 0, "lr": 0.1, "lambda": 1.0})
    model = detector.model
    # g = p - 1{y = k} with p = 1/2, h = 1/4: -lr * G / (H + lambda)
    assert model.rounds[0][0].value == [pytest.approx(0.05)]
    assert model.rounds[0][1].value == [pytest.approx(-0.05)]
    assert model.loss_history[0] == pytest.approx(np.log(2.0))
    expected = np.exp([0.05, -0.05]) / np.exp([0.05, -0.05]).sum()
    np.testing.assert_allclose(detector.predict_proba(X), np.tile(expected, (4, 1)))


@pytest.mark.parametrize("policy", [LEVEL_WISE, LEAF_WISE])
def test_gbdt_fits_blobs(policy):
    X, y = blobs(seed=4)
    params = {"trees": 15, "max_depth": 2} if policy == LEVEL_WISE else {"trees": 15, "max_leaves": 4}
    seen = []
    detector = train_gbdt(X, y, policy, params, on_tree=lambda r, k, tree: seen.append((r, k)))
    history = detector.model.loss_history
    assert len(history) == 16
    assert history[-1] < history[0]
    assert len(seen) == 15 * 3
    assert np.mean(detector.predict(X) == y) >= 0.9


@pytest.mark.parametrize("policy", [LEVEL_WISE, LEAF_WISE])
@pytest.mark.parametrize("seed", range(5))
def test_gbdt_loss_never_rises(policy, seed):
    X, y = blobs(seed=seed, spread=1.5)
    history = train_gbdt(X, y, policy, {"trees": 20}).model.loss_history
    assert len(history) == 21
    assert np.all(np.diff(history) <= 1e-12)


def test_leaf_wise_defaults_grow_past_the_level_wise_depth():
    X, y = blobs(n_per_class=50, seed=3, spread=2.0)
    depths = {}
    for policy in (LEVEL_WISE, LEAF_WISE):
        model = train_gbdt(X, y, policy, {"trees": 2}).model
        depths[policy] = [tree.max_depth for trees in model.rounds for tree in trees]
    assert max(depths[LEVEL_WISE]) <= 4
    assert max(depths[LEAF_WISE]) > 4


@pytest.mark.parametrize("params", [{"trees": 0}, {"lr": 0.0}, {"lambda": -1.0}, {"max_depth": -1}])
def test_gbdt_rejects_bad_params(params):
    X, y = blobs()
    with pytest.raises(ConfigError):
        train_gbdt(X, y, LEVEL_WISE, params)


# Network

@pytest.mark.parametrize("seed", range(10))
def test_mlp_gradients_match_differences(seed):
    X, y = blobs(n_per_class=5, k=3, d=3, seed=seed)
    network = init_mlp(3, 5, 3, seed=seed)
    _, grads = network.loss_grads(X, y, with_input=True)
    rng = np.random.default_rng(50 + seed)
    step = 1e-6

    def central(loss_at):
        return (-loss_at(2 * step) + 8 * loss_at(step) - 8 * loss_at(-step) + loss_at(-2 * step)) / (12 * step)

    for name in network.params:
        direction = rng.normal(size=network.params[name].shape)
        original = network.params[name].copy()

        def loss_at(t):
            network.params[name] = original + t * direction
            return network.loss_grads(X, y)[0]

        numeric = central(loss_at)
        network.params[name] = original
        assert numeric == pytest.approx(np.sum(grads[name] * direction), rel=1e-4, abs=1e-9)

    direction = rng.normal(size=X.shape)
    numeric = central(lambda t: network.loss_grads(X + t * direction, y)[0])
    assert grads["input"].shape == X.shape
    assert numeric == pytest.approx(np.sum(grads["input"] * direction), rel=1e-4, abs=1e-9)


def test_mlp_zero_learning_rate_keeps_initial_weights():
    X, y = blobs(seed=5)
    detector = train_mlp(X, y, hidden=6, epochs=3, lr=0.0, seed=2)
    start = init_mlp(X.shape[1], 6, 3, seed=2)
    for name, value in start.params.items():
        np.testing.assert_array_equal(detector.model.params[name], value)


def test_mlp_learns_xor_for_most_seeds():
    rng = np.random.default_rng(0)
    corners = np.array([[-1.0, -1.0], [1.0, 1.0], [-1.0, 1.0], [1.0, -1.0]])
    X = np.concatenate([c + 0.1 * rng.normal(size=(50, 2)) for c in corners])
    y = np.repeat([0, 0, 1, 1], 50)
    solved = 0
    for seed in range(10):
        detector = train_mlp(X, y, hidden=16, epochs=200, lr=0.05, seed=seed)
        solved += np.mean(detector.predict(X) == y) >= 0.95
    assert solved >= 8


def test_mlp_is_seeded():
    X, y = blobs(seed=1)
    a = train_mlp(X, y, hidden=6, epochs=5, seed=3)
    b = train_mlp(X, y, hidden=6, epochs=5, seed=3)
    np.testing.assert_array_equal(a.predict_proba(X), b.predict_proba(X))


# Common detector surface

@pytest.mark.parametrize("kind", DETECTOR_KINDS)
def test_every_kind_trains_predicts_and_round_trips(tmp_path, kind):
    X, y = blobs(seed=11)
    detector = train_detector(kind, X, y, SMALL_PARAMS[kind])
    P = predict_proba(detector, X)
    assert P.shape == (len(y), 3)
    np.testing.assert_allclose(P.sum(axis=1), 1.0)
    np.testing.assert_array_equal(predict(detector, X), np.argmax(P, axis=1))

    path = tmp_path / f"{kind}.adet"
    save_detector(detector, path)
    loaded = load_detector(path)
    assert loaded.kind == kind
    assert loaded.params == detector.params
    np.testing.assert_array_equal(loaded.predict_proba(X), P)

    with pytest.raises(ShapeError):
        detector.predict_proba(X[:, :2])


def test_training_needs_two_classes():
    with pytest.raises(InvalidInputError):
        train_detector("adaboost", np.zeros((4, 2)), np.zeros(4, dtype=int))


def test_unknown_parameter_is_rejected():
    with pytest.raises(ConfigError):
        resolve_params("mlp", {"layers": 3})
    with pytest.raises(ConfigError):
        train_detector("svm", np.zeros((4, 2)), np.array([0, 1, 0, 1]))


def test_train_detectors_scores_every_kind():
    X, y = blobs(seed=12)
    train_set, eval_set = feature_set(X[::2], y[::2]), feature_set(X[1::2], y[1::2])
    results = train_detectors(train_set, eval_set, DETECTOR_KINDS, SMALL_PARAMS)
    assert list(results) == list(DETECTOR_KINDS)
    for detector, confusion, bundle in results.values():
        assert confusion.total == eval_set.N
        assert bundle.accuracy == pytest.approx(np.mean(detector.predict(eval_set.features) == eval_set.labels))


def test_evaluate_detector_rejects_empty_set():
    X, y = blobs(seed=13)
    detector = train_detector("adaboost", X, y, {"rounds": 2})
    with pytest.raises(InvalidInputError):
        evaluate_detector(detector, feature_set(X, y).rows([]))


# Sweep

def test_sweep_rows_are_lr_major(tmp_path):
    X, y = blobs(seed=14)
    train_set, val_set = feature_set(X[::2], y[::2]), feature_set(X[1::2], y[1::2])
    rows = sensitivity_sweep("gbdt_leaf", ([0.1, 0.5], [2, 4, 8]), train_set, val_set, {"trees": 3})
    assert [(r.lr, r.depth_or_leaves) for r in rows] == [(0.1, 2), (0.1, 4), (0.1, 8), (0.5, 2), (0.5, 4), (0.5, 8)]

    path = tmp_path / "sweep.csv"
    write_sweep_csv(rows, path)
    lines = list(csv.reader(path.open(encoding="utf-8")))
    assert lines[0] == ["kind", "lr", "depth_or_leaves", "accuracy", "f1_macro", "accuracy_range"]
    assert len(lines) == 7
    accuracies = [r.accuracy for r in rows]
    assert float(lines[1][5]) == pytest.approx(max(accuracies) - min(accuracies))


def test_sweep_needs_both_axes():
    X, y = blobs(seed=15)
    fs = feature_set(X, y)
    with pytest.raises(InvalidInputError):
        sensitivity_sweep("mlp", ([], [4]), fs, fs)


# Features

def test_extract_features_normalizes(tiny_model, tiny_dataset):
    fs = extract_features(tiny_model, tiny_dataset.images, tiny_dataset.labels, ids=tiny_dataset.ids)
    assert fs.N == tiny_dataset.N and fs.D == tiny_model.arch.embed_dim
    np.testing.assert_allclose(fs.features.mean(axis=0), 0.0, atol=1e-9)
    assert fs.tags == ("clean",) * tiny_dataset.N
    assert not fs.adv_flags.any()


def test_extract_features_rejects_mismatched_labels(tiny_model, tiny_dataset):
    with pytest.raises(ShapeError):
        extract_features(tiny_model, tiny_dataset.images, tiny_dataset.labels[:-1])


def test_attack_features_split_by_source_id(tiny_model, tiny_dataset):
    clean = tiny_dataset.head(8)
    config = AttackConfig(apgd_iters=2, apgd_restarts=0, dlr_restarts=0, deepfool_max_iter=5)
    adversarial = generate_attacks(tiny_model, clean, ("fgsm", "deepfool"), config)
    fs = feature_set_from_attacks(tiny_model, clean, adversarial)

    assert fs.N == 24
    assert fs.tags == ("clean",) * 8 + ("deepfool",) * 8 + ("fgsm",) * 8
    assert int(fs.adv_flags.sum()) == 16
    np.testing.assert_array_equal(fs.labels, np.tile(clean.labels, 3))

    train, held = split_features(fs, 0.75, seed=0)
    assert train.N + held.N == 24
    assert set(train.ids).isdisjoint(held.ids)
    assert train.N % 3 == 0
    np.testing.assert_allclose(train.features.mean(axis=0), 0.0, atol=1e-9)
    np.testing.assert_array_equal(held.norm_mean, train.norm_mean)

    detect = detection_task(held)
    np.testing.assert_array_equal(detect.labels, held.adv_flags.astype(int))
    np.testing.assert_array_equal(detect.original_labels, held.labels)
    assert detect.num_classes == 2


def test_split_features_rejects_bad_fraction(tiny_model, tiny_dataset):
    fs = extract_features(tiny_model, tiny_dataset.images[:4], tiny_dataset.labels[:4])
    with pytest.raises(ConfigError):
        split_features(fs, 1.0, seed=0)
