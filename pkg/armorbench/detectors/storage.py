"""
Detector files (magic ADET, version 1).

Metadata carries the kind, class count, feature dimension, hyperparameters
and the fitted model description; tree ensembles live entirely in the
metadata as node arrays, the network's weights are the blob as float64.
"""

import structlog

from ..errors import CheckpointError
from ..utils.container import read_container, write_container
from .adaboost import AdaBoostEnsemble
from .base import ADABOOST, GBDT_LEAF, GBDT_LEVEL, MLP, Detector
from .gbdt import GradientBoostedTrees
from .mlp import MLPNetwork

log = structlog.get_logger()

MAGIC = b"ADET"
VERSION = 1


def save_detector(detector, path):
    metadata = {
        "kind": detector.kind,
        "num_classes": detector.num_classes,
        "n_features": detector.n_features,
        "params": detector.params,
        "model": detector.model.to_dict(),
    }
    write_container(path, MAGIC, VERSION, metadata, detector.model.to_blob())
    log.debug("detector saved", kind=detector.kind, path=str(path))


def load_detector(path):
    metadata, blob = read_container(path, MAGIC, VERSION)
    kind = metadata["kind"]
    if kind == ADABOOST:
        model = AdaBoostEnsemble.from_dict(metadata["model"])
    elif kind in (GBDT_LEVEL, GBDT_LEAF):
        model = GradientBoostedTrees.from_dict(metadata["model"])
    elif kind == MLP:
        model = MLPNetwork.from_parts(metadata["model"], blob)
    else:
        raise CheckpointError(f"{path}: unknown detector kind {kind!r}")
    return Detector(kind, metadata["num_classes"], metadata["n_features"], metadata["params"], model)
