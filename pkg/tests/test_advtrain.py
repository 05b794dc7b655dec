import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from armorbench.attacks import AttackConfig
from armorbench.errors import ConfigError, InvalidInputError
from armorbench.model import TrainConfig
from armorbench.model.training import EpochRecord, accuracy
from armorbench.training import (
    AdvTrainConfig,
    allocate_mix,
    build_adversarial_dataset,
    evaluate_model,
    retrain,
    write_monitor_log,
)

EPS = 8.0 / 255.0
ATTACK = AttackConfig(epsilon=EPS, apgd_iters=3, apgd_restarts=0, dlr_restarts=1, deepfool_max_iter=10, seed=2)


def test_allocate_mix_even_thirds():
    labels = np.repeat([0, 1, 2], 30)
    tags = allocate_mix(labels, (1 / 3, 1 / 3, 1 / 3), seed=0)
    for c in range(3):
        members = tags[labels == c]
        assert sorted(members).count("clean") == 10
        assert list(members).count("sequential") == 10
        assert list(members).count("fused") == 10


def test_allocate_mix_largest_remainder_prefers_earlier_tag():
    tags = allocate_mix(np.zeros(10, dtype=int), (0.5, 0.25, 0.25), seed=1)
    assert [list(tags).count(t) for t in ("clean", "sequential", "fused")] == [5, 3, 2]


@given(
    st.lists(st.integers(0, 4), min_size=1, max_size=60),
    st.sampled_from([(1.0, 0.0, 0.0), (0.0, 0.5, 0.5), (0.2, 0.3, 0.5), (1 / 3, 1 / 3, 1 / 3)]),
    st.integers(0, 100),
)
def test_allocate_mix_counts_sum_per_class(labels, mix, seed):
    labels = np.array(labels)
    tags = allocate_mix(labels, mix, seed)
    np.testing.assert_array_equal(tags, allocate_mix(labels, mix, seed))
    for c in np.unique(labels):
        members = list(tags[labels == c])
        counts = [members.count(t) for t in ("clean", "sequential", "fused")]
        assert sum(counts) == len(members)
        for count, fraction in zip(counts, mix):
            assert abs(count - fraction * len(members)) < 1.0


@pytest.mark.parametrize("mix", [(0.5, 0.5, 0.5), (1.0, 0.0), (1.5, -0.25, -0.25)])
def test_mix_must_be_a_distribution(mix):
    with pytest.raises(ConfigError):
        AdvTrainConfig(mix=mix)


def test_build_adversarial_dataset_keeps_ids_and_labels(tiny_model, tiny_dataset):
    source = tiny_dataset.head(9)
    config = AdvTrainConfig(attack=ATTACK, seed=4)
    adv = build_adversarial_dataset(tiny_model, source, config)

    np.testing.assert_array_equal(adv.ids, source.ids)
    np.testing.assert_array_equal(adv.labels, source.labels)
    assert list(adv.tags) == list(allocate_mix(source.labels, config.mix, config.seed))
    for i, tag in enumerate(adv.tags):
        delta = np.abs(adv.images[i].astype(np.float64) - source.images[i])
        if tag == "clean":
            assert delta.max() == 0.0
        elif tag == "sequential":
            assert delta.max() <= EPS + 1e-6


def test_build_adversarial_dataset_uses_explicit_mix(tiny_model, tiny_dataset):
    source = tiny_dataset.head(4)
    adv = build_adversarial_dataset(tiny_model, source, AdvTrainConfig(attack=ATTACK), mix=(1.0, 0.0, 0.0))
    assert adv.tag_counts() == {"clean": 4}
    np.testing.assert_array_equal(adv.images, source.images)


def test_build_adversarial_dataset_rejects_empty(tiny_model, tiny_dataset):
    with pytest.raises(InvalidInputError):
        build_adversarial_dataset(tiny_model, tiny_dataset.head(0), AdvTrainConfig(attack=ATTACK))


def test_retrain_keeps_best_adversarial_epoch(tiny_model, tiny_dataset):
    train_set, val = tiny_dataset.subset(np.arange(40)), tiny_dataset.subset(np.arange(40, 60))
    config = TrainConfig(epochs=3, batch_size=10, lr=0.05, seed=5)
    best, records = retrain(tiny_model, train_set, val, val.head(10), config)

    assert [r.epoch for r in records] == [0, 1, 2]
    assert all(r.clean_val_acc is not None and r.adv_val_acc is not None for r in records)
    top = max(r.adv_val_acc for r in records)
    assert accuracy(best, val.head(10)) == top


def test_retrain_with_zero_epochs_returns_a_copy(tiny_model, tiny_dataset):
    model, records = retrain(tiny_model, tiny_dataset, tiny_dataset, tiny_dataset, TrainConfig(epochs=0))
    assert records == []
    assert model is not tiny_model
    np.testing.assert_array_equal(model.params["E"], tiny_model.params["E"])


def test_retrain_needs_validation_data(tiny_model, tiny_dataset):
    with pytest.raises(InvalidInputError):
        retrain(tiny_model, tiny_dataset, tiny_dataset.head(0), tiny_dataset, TrainConfig(epochs=1))


def test_evaluate_model_matches_predictions(tiny_model, tiny_dataset):
    report = evaluate_model(tiny_model, tiny_dataset)
    predictions = tiny_model.predict(tiny_dataset.images)
    assert report.accuracy == pytest.approx(np.mean(predictions == tiny_dataset.labels))
    assert report.confusion.sum() == tiny_dataset.N
    assert report.n_eval == tiny_dataset.N
    data = report.to_dict()
    assert data["confusion"] == report.confusion.tolist()
    assert data["metrics"]["accuracy"] == report.accuracy


def test_monitor_log_format(tmp_path):
    records = [EpochRecord(0, 1.5, 0.5, 0.25), EpochRecord(1, 1.25, None, None)]
    path = tmp_path / "monitor.csv"
    write_monitor_log(records, path)
    rows = list(csv.reader(path.open(encoding="utf-8")))
    assert rows[0] == ["epoch", "train_loss", "clean_val_acc", "adv_val_acc"]
    assert rows[1] == ["0", "1.5", "0.5", "0.25"]
    assert rows[2] == ["1", "1.25", "", ""]
