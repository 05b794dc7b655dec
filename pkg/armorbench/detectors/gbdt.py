"""
Gradient-boosted decision trees with a softmax objective.

Every round fits one regression tree per class to the first and second
derivatives of the multiclass log-loss at the current scores:
g = p_k - 1{y = k}, h = p_k (1 - p_k). The growth policy decides how each
tree expands: level_wise (breadth-first to max_depth) or leaf_wise (best
leaf first until max_leaves).
"""

import numpy as np
import structlog

from ..errors import ConfigError
from ..model.losses import softmax
from .base import GBDT_LEAF, GBDT_LEVEL, Detector, check_training_data, resolve_params
from .trees import LEAF_WISE, LEVEL_WISE, DecisionTree, grow_gradient_tree

log = structlog.get_logger()

POLICY_KINDS = {LEVEL_WISE: GBDT_LEVEL, LEAF_WISE: GBDT_LEAF}


def log_loss(P, y):
    return float(-np.mean(np.log(np.clip(P[np.arange(len(y)), y], 1e-15, None))))


class GradientBoostedTrees:
    """rounds x K regression trees summed into per-class scores."""

    def __init__(self, rounds, num_classes, policy, loss_history=()):
        self.rounds = [list(trees) for trees in rounds]
        self.num_classes = int(num_classes)
        self.policy = policy
        self.loss_history = [float(v) for v in loss_history]

    def raw_scores(self, X):
        F = np.zeros((X.shape[0], self.num_classes), dtype=np.float64)
        for trees in self.rounds:
            for k, tree in enumerate(trees):
                F[:, k] += tree.predict(X)
        return F

    def predict_proba(self, X):
        return softmax(self.raw_scores(X))

    def to_dict(self):
        return {
            "rounds": [[t.to_dict() for t in trees] for trees in self.rounds],
            "num_classes": self.num_classes,
            "policy": self.policy,
            "loss_history": self.loss_history,
        }

    @classmethod
    def from_dict(cls, data):
        rounds = [[DecisionTree.from_dict(t) for t in trees] for trees in data["rounds"]]
        return cls(rounds, data["num_classes"], data["policy"], data.get("loss_history", ()))

    def to_blob(self):
        return b""


def _check_params(kind, params):
    def require(ok, key, message):
        if not ok:
            raise ConfigError(f"{message}, got {params[key]!r}", f"detectors.params.{kind}.{key}")

    require(params["trees"] >= 1, "trees", "must be >= 1")
    require(params["lr"] > 0, "lr", "must be > 0")
    require(params["lambda"] >= 0, "lambda", "must be >= 0")
    require(params["gamma"] >= 0, "gamma", "must be >= 0")
    require(params["min_samples"] >= 1, "min_samples", "must be >= 1")
    if kind == GBDT_LEVEL:
        require(params["max_depth"] >= 0, "max_depth", "must be >= 0")
    else:
        require(params["max_leaves"] >= 1, "max_leaves", "must be >= 1")


def train_gbdt(features, labels, policy=LEVEL_WISE, params=None, on_tree=None):
    """
    Fit a boosted ensemble. Scores start at zero; leaf values already include
    the learning rate. The model's loss_history holds the training log-loss
    before the first round followed by the loss after every round.

    on_tree(round, class_index, tree) is called for every fitted tree.
    """
    if policy not in POLICY_KINDS:
        raise ConfigError(f"unknown growth policy {policy!r}", "detectors.policy")
    kind = POLICY_KINDS[policy]
    params = resolve_params(kind, params)
    _check_params(kind, params)
    X, y, K = check_training_data(features, labels)

    Y = np.zeros((X.shape[0], K), dtype=np.float64)
    Y[np.arange(X.shape[0]), y] = 1.0
    F = np.zeros_like(Y)
    P = softmax(F)
    history = [log_loss(P, y)]
    rounds = []
    grow = dict(
        policy=policy,
        lr=params["lr"],
        lam=params["lambda"],
        gamma=params["gamma"],
        min_samples=params["min_samples"],
        max_depth=params.get("max_depth", 0),
        max_leaves=params.get("max_leaves", 1),
    )

    for r in range(params["trees"]):
        trees = []
        update = np.zeros_like(F)
        for k in range(K):
            g = P[:, k] - Y[:, k]
            h = P[:, k] * (1.0 - P[:, k])
            tree, values = grow_gradient_tree(X, g, h, **grow)
            update[:, k] = values
            trees.append(tree)
            if on_tree is not None:
                on_tree(r, k, tree)
        F += update
        P = softmax(F)
        history.append(log_loss(P, y))
        rounds.append(trees)
        log.debug("boosting round", kind=kind, round=r + 1, train_loss=history[-1])

    log.info("gbdt trained", kind=kind, rounds=len(rounds), num_classes=K, train_loss=history[-1])
    return Detector(kind, K, X.shape[1], params, GradientBoostedTrees(rounds, K, policy, history))
