"""
Training and evaluating detectors by kind, plus hyperparameter sweeps.
"""

import csv
import os
from dataclasses import dataclass

import structlog

from ..errors import InvalidInputError
from ..report.classification import classification_metrics
from .adaboost import fit_adaboost
from .base import ADABOOST, DETECTOR_KINDS, GBDT_LEAF, GBDT_LEVEL, MLP, check_kind, resolve_params
from .gbdt import train_gbdt
from .mlp import fit_mlp
from .trees import LEAF_WISE, LEVEL_WISE

log = structlog.get_logger()

SWEEP_HEADER = ("kind", "lr", "depth_or_leaves", "accuracy", "f1_macro", "accuracy_range")

# hyperparameter names behind the sweep's two axes
SWEEP_AXES = {
    ADABOOST: ("learning_rate", "depth"),
    GBDT_LEVEL: ("lr", "max_depth"),
    GBDT_LEAF: ("lr", "max_leaves"),
    MLP: ("lr", "hidden"),
}


def train_detector(kind, features, labels, params=None):
    """Fit one detector of the given kind; params overlay the defaults."""
    check_kind(kind)
    if kind == ADABOOST:
        return fit_adaboost(features, labels, params)
    if kind == GBDT_LEVEL:
        return train_gbdt(features, labels, LEVEL_WISE, params)
    if kind == GBDT_LEAF:
        return train_gbdt(features, labels, LEAF_WISE, params)
    return fit_mlp(features, labels, params)


def evaluate_detector(detector, feature_set):
    """(confusion, MetricsBundle) of the detector's predictions on a feature set."""
    if feature_set.N == 0:
        raise InvalidInputError("cannot evaluate a detector on an empty feature set")
    k = max(detector.num_classes, feature_set.num_classes)
    return classification_metrics(feature_set.labels, detector.predict(feature_set.features), k)


def train_detectors(train_set, eval_set, kinds=DETECTOR_KINDS, params=None):
    """
    Train each kind on train_set and score it on eval_set.

    Returns {kind: (detector, confusion, bundle)} in the order of kinds.
    """
    params = params or {}
    results = {}
    for kind in kinds:
        detector = train_detector(kind, train_set.features, train_set.labels, params.get(kind))
        confusion, bundle = evaluate_detector(detector, eval_set)
        log.info("detector trained", kind=kind, accuracy=round(bundle.accuracy, 6), macro_f1=round(bundle.macro_f1, 6))
        results[kind] = (detector, confusion, bundle)
    return results


@dataclass(frozen=True)
class SweepRow:
    kind: str
    lr: float
    depth_or_leaves: int
    accuracy: float
    f1_macro: float


def sensitivity_sweep(kind, grid, train_set, val_set, params=None, seed=0):
    """
    One detector per (lr, depth_or_leaves) cell of grid, scored on val_set.

    grid is a pair (lr values, depth-or-leaves values); rows come out in
    lr-major order. The MLP seed is fixed to seed for every cell.
    """
    lrs, sizes = (list(axis) for axis in grid)
    if not lrs or not sizes:
        raise InvalidInputError("sweep grid must have at least one value on each axis")
    lr_key, size_key = SWEEP_AXES[check_kind(kind)]
    base = resolve_params(kind, params)
    if kind == MLP:
        base["seed"] = seed

    rows = []
    for lr in lrs:
        for size in sizes:
            cell = dict(base, **{lr_key: lr, size_key: size})
            detector = train_detector(kind, train_set.features, train_set.labels, cell)
            _, bundle = evaluate_detector(detector, val_set)
            rows.append(SweepRow(kind, float(lr), int(size), bundle.accuracy, bundle.macro_f1))
            log.debug("sweep cell", kind=kind, lr=lr, size=size, accuracy=bundle.accuracy)
    log.info("sweep finished", kind=kind, cells=len(rows), accuracy_range=accuracy_range(rows))
    return rows


def accuracy_range(rows):
    accuracies = [r.accuracy for r in rows]
    return float(max(accuracies) - min(accuracies)) if accuracies else 0.0


def write_sweep_csv(rows, path):
    """kind,lr,depth_or_leaves,accuracy,f1_macro plus the kind's accuracy range (max - min)."""
    ranges = {}
    for kind in dict.fromkeys(r.kind for r in rows):
        ranges[kind] = accuracy_range([r for r in rows if r.kind == kind])
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for r in rows:
            writer.writerow([r.kind, repr(r.lr), r.depth_or_leaves, repr(r.accuracy), repr(r.f1_macro), repr(ranges[r.kind])])
