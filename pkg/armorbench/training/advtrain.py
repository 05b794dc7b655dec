"""
Adversarial fine-tuning.

Adversarial examples are generated once against the baseline model, mixed
with clean samples, and the model is retrained on the combined set while
clean and adversarial validation accuracy are monitored every epoch.
"""

import csv
import os
from dataclasses import dataclass, field

import numpy as np
import structlog

from ..attacks import AttackConfig, fused_attack, sequential_attack
from ..data.dataset import CLEAN
from ..errors import ArmorBenchError, ConfigError, InvalidInputError
from ..model.training import TrainConfig, train
from ..report.classification import confusion_matrix, metrics
from ..utils.parallel import map_ordered

log = structlog.get_logger()

SEQUENTIAL = "sequential"
FUSED = "fused"
MIX_TAGS = (CLEAN, SEQUENTIAL, FUSED)
MONITOR_HEADER = ("epoch", "train_loss", "clean_val_acc", "adv_val_acc")


def check_mix(mix, path="advtrain.mix"):
    """Three nonnegative fractions summing to 1 within 1e-9."""
    mix = tuple(float(m) for m in mix)
    if len(mix) != 3 or min(mix) < 0.0 or abs(sum(mix) - 1.0) > 1e-9:
        raise ConfigError(f"expected 3 nonnegative fractions summing to 1, got {mix}", path)
    return mix


@dataclass(frozen=True)
class AdvTrainConfig:
    """Adversarial set composition and retraining hyperparameters."""

    attack: AttackConfig = field(default_factory=AttackConfig)
    mix: tuple = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
    val_mix: tuple = (0.0, 0.5, 0.5)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "mix", check_mix(self.mix))
        object.__setattr__(self, "val_mix", check_mix(self.val_mix, "advtrain.val_mix"))


@dataclass(frozen=True)
class EvalReport:
    """Metrics of one model on one dataset."""

    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    confusion: np.ndarray
    n_eval: int
    bundle: object = None

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "confusion": self.confusion.tolist(),
            "n_eval": self.n_eval,
            "metrics": self.bundle.to_dict() if self.bundle is not None else None,
        }


def allocate_mix(labels, mix, seed):
    """
    Assign every sample one of clean / sequential / fused.

    Within each class the counts follow largest-remainder allocation of the
    mix fractions (ties to the earlier tag) over a seeded order of the class.
    """
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(labels), dtype=object)
    for c in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == c))
        quotas = np.asarray(mix) * len(members)
        counts = np.floor(quotas).astype(int)
        shortfall = len(members) - counts.sum()
        for j in sorted(range(3), key=lambda j: (-(quotas[j] - counts[j]), j))[:shortfall]:
            counts[j] += 1
        bounds = np.cumsum(counts)
        for j, tag in enumerate(MIX_TAGS):
            assignment[members[bounds[j] - counts[j]:bounds[j]]] = tag
    return assignment


def build_adversarial_dataset(model, dataset, config, mix=None, threads=None):
    """
    Replace samples by sequential or fused adversarial versions per the mix.

    Labels stay the true labels; each source sample appears exactly once.
    A sample whose attack fails stays clean and a warning is logged.
    """
    if dataset.N == 0:
        raise InvalidInputError("cannot build an adversarial set from an empty dataset")
    mix = check_mix(config.mix if mix is None else mix)
    threads = config.threads if threads is None else threads
    assignment = allocate_mix(dataset.labels, mix, config.seed)

    def attack(index):
        tag = assignment[index]
        sample = dataset[index]
        if tag == CLEAN:
            return sample.pixels, CLEAN
        try:
            if tag == SEQUENTIAL:
                example = sequential_attack(model, sample, config.attack)
            else:
                example = fused_attack(model, sample, config.attack)
        except ArmorBenchError as exc:
            log.warning("attack failed, keeping clean sample", sample_id=sample.id, kind=tag, error=str(exc))
            return sample.pixels, CLEAN
        return example.adv_pixels, tag

    results = map_ordered(attack, range(dataset.N), threads)
    adversarial = dataset.with_images(
        np.stack([pixels for pixels, _ in results]).astype(np.float32),
        tags=[tag for _, tag in results],
    )
    log.info("adversarial dataset built", n=adversarial.N, **adversarial.tag_counts())
    return adversarial


def retrain(model, adv_dataset, val_clean, val_adv, config):
    """
    Fine-tune on the combined set, keeping the epoch with the best adversarial
    validation accuracy (earliest epoch on ties).

    config is a TrainConfig. Returns (model, monitor log).
    """
    if val_clean.N == 0 or val_adv.N == 0:
        raise InvalidInputError("retraining needs nonempty clean and adversarial validation sets")
    if config.epochs == 0:
        return model.copy(), []

    best = {"acc": -1.0, "model": None, "epoch": None}

    def keep_best(record, current):
        if record.adv_val_acc > best["acc"]:
            best.update(acc=record.adv_val_acc, model=current.copy(), epoch=record.epoch)

    _, records = train(model, adv_dataset, config, val_clean=val_clean, val_adv=val_adv, callback=keep_best)
    log.info("retraining finished", best_epoch=best["epoch"], adv_val_acc=best["acc"])
    return best["model"], records


def evaluate_model(model, dataset):
    """Accuracy, macro metrics and confusion matrix of argmax predictions."""
    if dataset.N == 0:
        raise InvalidInputError("cannot evaluate on an empty dataset")
    predictions = model.predict(dataset.images)
    confusion = confusion_matrix(dataset.labels, predictions, dataset.num_classes)
    bundle = metrics(confusion)
    return EvalReport(
        accuracy=bundle.accuracy,
        macro_precision=bundle.macro_precision,
        macro_recall=bundle.macro_recall,
        macro_f1=bundle.macro_f1,
        confusion=confusion.counts,
        n_eval=dataset.N,
        bundle=bundle,
    )


def write_monitor_log(records, path):
    """CSV epoch,train_loss,clean_val_acc,adv_val_acc; missing values are empty."""
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(MONITOR_HEADER)
        for r in records:
            writer.writerow([
                r.epoch,
                repr(float(r.train_loss)),
                "" if r.clean_val_acc is None else repr(r.clean_val_acc),
                "" if r.adv_val_acc is None else repr(r.adv_val_acc),
            ])
