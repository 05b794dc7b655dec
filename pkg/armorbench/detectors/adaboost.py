"""
Multiclass AdaBoost (SAMME) over shallow weighted-error trees.
"""

import numpy as np
import structlog

from ..errors import ConfigError
from .base import ADABOOST, Detector, check_training_data, resolve_params
from .trees import DecisionTree, grow_error_tree

log = structlog.get_logger()

MIN_ERROR = 1e-10


class AdaBoostEnsemble:
    """Weak learners with their vote weights."""

    def __init__(self, trees, alphas, num_classes, halted_at=None):
        self.trees = list(trees)
        self.alphas = [float(a) for a in alphas]
        self.num_classes = int(num_classes)
        self.halted_at = halted_at

    def votes(self, X):
        """Sum of alpha over the rounds voting for each class."""
        votes = np.zeros((X.shape[0], self.num_classes), dtype=np.float64)
        rows = np.arange(X.shape[0])
        for tree, alpha in zip(self.trees, self.alphas):
            votes[rows, tree.predict(X).astype(np.int64)] += alpha
        return votes

    def predict_proba(self, X):
        total = sum(self.alphas)
        if total <= 0.0:
            return np.full((X.shape[0], self.num_classes), 1.0 / self.num_classes)
        scores = self.votes(X) / total / max(self.num_classes - 1, 1)
        scores -= scores.max(axis=1, keepdims=True)
        e = np.exp(scores)
        return e / e.sum(axis=1, keepdims=True)

    def to_dict(self):
        return {
            "trees": [t.to_dict() for t in self.trees],
            "alphas": self.alphas,
            "num_classes": self.num_classes,
            "halted_at": self.halted_at,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            [DecisionTree.from_dict(t) for t in data["trees"]],
            data["alphas"],
            data["num_classes"],
            data.get("halted_at"),
        )

    def to_blob(self):
        return b""


def samme_alpha(error, num_classes, learning_rate=1.0):
    """alpha = lr * (ln((1 - err) / err) + ln(K - 1))"""
    error = max(error, MIN_ERROR)
    return learning_rate * (np.log((1.0 - error) / error) + np.log(num_classes - 1))


def train_adaboost(features, labels, rounds=100, depth=1, learning_rate=1.0, on_round=None):
    """
    Fit SAMME boosting. Each round fits the weighted-error tree of the given
    depth, weights misclassified samples up by exp(alpha) and renormalizes.

    Boosting halts before adding a learner whose weighted error reaches
    1 - 1/K and records that round in halted_at; a perfect learner is kept
    and ends training. on_round(round, weights) sees the weights after every
    renormalization.
    """
    X, y, K = check_training_data(features, labels)
    if rounds < 1:
        raise ConfigError(f"rounds must be >= 1, got {rounds}", "detectors.params.adaboost.rounds")
    if depth < 1:
        raise ConfigError(f"depth must be >= 1, got {depth}", "detectors.params.adaboost.depth")
    if learning_rate <= 0:
        raise ConfigError(f"learning_rate must be > 0, got {learning_rate}", "detectors.params.adaboost.learning_rate")

    weights = np.full(X.shape[0], 1.0 / X.shape[0])
    trees, alphas, halted_at = [], [], None
    for m in range(1, rounds + 1):
        tree = grow_error_tree(X, y, weights, K, depth)
        miss = tree.predict(X).astype(np.int64) != y
        error = float(weights[miss].sum())
        if error >= 1.0 - 1.0 / K:
            halted_at = m
            log.info("adaboost halted", round=m, error=error)
            break

        alpha = samme_alpha(error, K, learning_rate)
        trees.append(tree)
        alphas.append(alpha)
        weights = weights * np.exp(alpha * miss)
        weights /= weights.sum()
        if on_round is not None:
            on_round(m, weights)
        if error <= 0.0:
            break

    log.debug("adaboost trained", rounds=len(trees), num_classes=K, halted_at=halted_at)
    params = {"rounds": rounds, "depth": depth, "learning_rate": learning_rate}
    return Detector(ADABOOST, K, X.shape[1], params, AdaBoostEnsemble(trees, alphas, K, halted_at))


def fit_adaboost(features, labels, params=None):
    params = resolve_params(ADABOOST, params)
    return train_adaboost(features, labels, params["rounds"], params["depth"], params["learning_rate"])
