"""Feature extraction and the AdaBoost, GBDT and MLP detector families."""

from .adaboost import AdaBoostEnsemble, train_adaboost
from .base import DEFAULT_PARAMS, DETECTOR_KINDS, Detector, predict, predict_proba
from .features import (
    FeatureSet,
    detection_task,
    extract_features,
    feature_set_from_attacks,
    split_features,
)
from .gbdt import GradientBoostedTrees, train_gbdt
from .mlp import MLPNetwork, init_mlp, train_mlp
from .runner import (
    SweepRow,
    evaluate_detector,
    sensitivity_sweep,
    train_detector,
    train_detectors,
    write_sweep_csv,
)
from .storage import load_detector, save_detector
from .trees import LEAF_WISE, LEVEL_WISE, DecisionTree
