"""
Fitted detector wrapper and hyperparameter defaults.

A Detector holds the family kind, the output class count, the feature
dimension it was trained on, the hyperparameters used, and the fitted model
of that family (an ensemble or a network object exposing predict_proba).
"""

import numpy as np

from ..errors import ConfigError, InvalidInputError, ShapeError

ADABOOST = "adaboost"
GBDT_LEVEL = "gbdt_level"
GBDT_LEAF = "gbdt_leaf"
MLP = "mlp"
DETECTOR_KINDS = (ADABOOST, GBDT_LEVEL, GBDT_LEAF, MLP)

DEFAULT_PARAMS = {
    ADABOOST: {"rounds": 100, "depth": 1, "learning_rate": 1.0},
    GBDT_LEVEL: {
        "trees": 100,
        "lr": 0.1,
        "max_depth": 4,
        "lambda": 1.0,
        "gamma": 0.0,
        "min_samples": 2,
    },
    GBDT_LEAF: {
        "trees": 100,
        "lr": 0.1,
        "max_leaves": 16,
        "lambda": 1.0,
        "gamma": 0.0,
        "min_samples": 2,
    },
    MLP: {"hidden": 64, "epochs": 200, "lr": 0.05, "batch_size": 64, "momentum": 0.9, "seed": 0},
}


def check_kind(kind):
    if kind not in DETECTOR_KINDS:
        raise ConfigError(f"unknown detector kind {kind!r}, expected one of {list(DETECTOR_KINDS)}", "detectors.kinds")
    return kind


def resolve_params(kind, params=None):
    """Defaults for kind overlaid with params; unknown keys are rejected."""
    merged = dict(DEFAULT_PARAMS[check_kind(kind)])
    for key, value in (params or {}).items():
        if key not in merged:
            raise ConfigError(f"unknown parameter {key!r}", f"detectors.params.{kind}.{key}")
        merged[key] = value
    return merged


def check_training_data(features, labels):
    """Validate a training matrix and return (X, y, K)."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InvalidInputError(f"expected a nonempty N x D feature matrix, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise ShapeError(f"{X.shape[0]} feature rows but {y.shape} labels")
    if y.min() < 0:
        raise InvalidInputError("labels must be nonnegative class indices")
    if len(np.unique(y)) < 2:
        raise InvalidInputError("training needs at least two classes present")
    return X, y, int(y.max()) + 1


class Detector:
    """A fitted classifier over feature vectors."""

    def __init__(self, kind, num_classes, n_features, params, model):
        self.kind = check_kind(kind)
        self.num_classes = int(num_classes)
        self.n_features = int(n_features)
        self.params = dict(params)
        self.model = model

    def _check_features(self, features):
        X = np.asarray(features, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(f"detector expects {self.n_features} features per row, got shape {X.shape}")
        return X

    def predict_proba(self, features):
        """N x K probability matrix; rows sum to 1."""
        return self.model.predict_proba(self._check_features(features))

    def predict(self, features):
        """Argmax class per row, lowest index on ties."""
        return np.argmax(self.predict_proba(features), axis=1)

    def __repr__(self):
        return f"Detector(kind={self.kind}, num_classes={self.num_classes}, n_features={self.n_features})"


def predict_proba(detector, features):
    return detector.predict_proba(features)


def predict(detector, features):
    return detector.predict(features)
