"""
Configuration for ArmorBench.

DEFAULT_CONFIG is the single table of defaults. Config files are strict JSON:
unknown keys, type mismatches and missing required keys raise ConfigError
naming the dotted path of the offending value.
"""

import copy
import json
import os

from .attacks.base import ATTACK_KINDS, AttackConfig
from .detectors.base import DEFAULT_PARAMS, DETECTOR_KINDS
from .errors import ConfigError
from .model.dual_encoder import Arch
from .model.training import TrainConfig
from .training.advtrain import AdvTrainConfig

CONFIG_ENV = "ARMORBENCH_CONFIG"

# Default configuration
DEFAULT_CONFIG = {
    "seed": 7,
    "output_dir": "runs/default",
    "threads": 1,
    "log": {"level": "INFO", "timestamps": False},
    "data": {
        "source": "synthetic",
        "cifar_path": None,
        "n": 2500,
        "num_classes": 10,
        "height": 32,
        "width": 32,
        "train_fraction": 0.8,
        "export_images": False,
    },
    "model": {
        "hidden_dim": 128,
        "embed_dim": 64,
        "temperature": 10.0,
        "train_temperature": False,
        "mean": [0.5, 0.5, 0.5],
        "std": [0.5, 0.5, 0.5],
    },
    "train": {
        "epochs": 20,
        "batch_size": 64,
        "lr": 0.05,
        "optimizer": "sgd",
        "momentum": 0.9,
        "beta1": 0.9,
        "beta2": 0.999,
        "adam_eps": 1e-8,
        "weight_decay": 0.0,
        "lr_decay_every": 0,
        "lr_decay_gamma": 0.5,
    },
    "attack": {
        "epsilon": 8.0 / 255.0,
        "apgd_iters": 50,
        "apgd_restarts": 2,
        "dlr_restarts": 1,
        "deepfool_max_iter": 50,
        "deepfool_overshoot": 0.02,
        "fuse_weights": [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        "kinds": list(ATTACK_KINDS),
        "eval_samples": None,
    },
    "advtrain": {
        "mix": [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        "val_mix": [0.0, 0.5, 0.5],
        "epochs": 20,
        "lr": 0.05,
    },
    "detectors": {
        "kinds": list(DETECTOR_KINDS),
        "source_model": "baseline",
        "train_fraction": 0.8,
        "detection": True,
        "params": copy.deepcopy(DEFAULT_PARAMS),
    },
    "sweep": {
        "kinds": list(DETECTOR_KINDS),
        "lr": [0.01, 0.1, 0.5, 1.0],
        "depth_or_leaves": [1, 2, 4, 8],
        "params": {
            "adaboost": {"rounds": 10},
            "gbdt_level": {"trees": 10},
            "gbdt_leaf": {"trees": 10},
            "mlp": {"epochs": 50},
        },
    },
    "report": {"held_out": 101, "charts": True},
}

REQUIRED_KEYS = ("seed", "output_dir", "data.source")

# keys whose default is null and the types they accept
NULLABLE = {
    "data.cifar_path": (str,),
    "attack.eval_samples": (int,),
}

# parameter tables validated against the full per-kind parameter list
PARAM_TABLES = ("detectors.params", "sweep.params")

CHOICES = {
    "data.source": ("synthetic", "cifar10"),
    "detectors.source_model": ("baseline", "finetuned"),
    "train.optimizer": ("sgd", "adam"),
    "log.level": ("DEBUG", "INFO", "WARNING", "ERROR"),
}


def _type_ok(template, value):
    if isinstance(template, bool):
        return isinstance(value, bool)
    if isinstance(template, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(template, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(template, str):
        return isinstance(value, str)
    if isinstance(template, list):
        if not isinstance(value, list):
            return False
        if template:
            return all(_type_ok(template[0], v) for v in value)
        return True
    return True


def _check_value(path, template, value):
    if template is None:
        accepted = NULLABLE.get(path, ())
        if value is not None and not any(_type_ok(t(), value) for t in accepted):
            raise ConfigError(f"expected null or {'/'.join(t.__name__ for t in accepted)}, got {value!r}", path)
    elif not _type_ok(template, value):
        raise ConfigError(f"expected {type(template).__name__}, got {value!r}", path)
    if path in CHOICES and value not in CHOICES[path]:
        raise ConfigError(f"expected one of {list(CHOICES[path])}, got {value!r}", path)


def _template_for(path, defaults):
    parent, _, key = path.rpartition(".")
    if parent in PARAM_TABLES:
        if key not in DEFAULT_PARAMS:
            raise ConfigError(f"unknown detector kind {key!r}", path)
        return DEFAULT_PARAMS[key]
    return defaults


def merge_config(defaults, user, path=""):
    """Overlay user values on defaults, rejecting unknown keys and wrong types."""
    if not isinstance(user, dict):
        raise ConfigError(f"expected an object, got {user!r}", path or "<root>")
    template = _template_for(path, defaults) if path else defaults
    merged = copy.deepcopy(defaults)
    for key, value in user.items():
        key_path = f"{path}.{key}" if path else key
        if key not in template:
            raise ConfigError("unknown key", key_path)
        expected = template[key]
        if isinstance(expected, dict):
            merged[key] = merge_config(defaults.get(key, {}), value, key_path)
        else:
            _check_value(key_path, expected, value)
            merged[key] = value
    return merged


def _has_path(data, dotted):
    node = data
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            return False
        node = node[part]
    return True


def parse_config(data):
    """Validate a parsed JSON object and fill in the defaults."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object", "<root>")
    missing = [key for key in REQUIRED_KEYS if not _has_path(data, key)]
    if missing:
        raise ConfigError(f"missing required keys {missing}", ", ".join(missing))
    return merge_config(DEFAULT_CONFIG, data)


def load_config(path):
    """Read and validate a JSON config file."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError("config file not found", str(path)) from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}: {exc.msg}", str(path)) from None
    return Config(parse_config(data), path)


def dump_config(config):
    """Full configuration (defaults included) as a plain dict."""
    return copy.deepcopy(config.data if isinstance(config, Config) else config)


def set_override(data, dotted, raw_value):
    """Apply one --set key=value override; raw_value is parsed as JSON when possible."""
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value
    patch = value
    for part in reversed(dotted.split(".")):
        patch = {part: patch}
    merge_config(DEFAULT_CONFIG, patch)
    return _deep_update(data, patch)


def _deep_update(base, patch):
    out = copy.deepcopy(base)
    for key, value in patch.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_update(out[key], value)
        else:
            out[key] = value
    return out


class Config:
    """Configuration manager for ArmorBench."""

    def __init__(self, data=None, path=None):
        self.data = copy.deepcopy(DEFAULT_CONFIG) if data is None else data
        self.path = path

    def get(self, key, default=None):
        """Get a configuration value by dotted key."""
        node = self.data
        for part in key.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def set(self, key, value):
        """Set a configuration value by dotted key, with validation."""
        self.data = set_override(self.data, key, json.dumps(value))

    def save(self, path=None):
        """Save the full configuration as JSON."""
        path = path or self.path
        directory = os.path.dirname(os.fspath(path))
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(self.data, f, indent=2, sort_keys=True)
            f.write("\n")

    # Typed sections

    def image_shape(self):
        return (3, self.get("data.height"), self.get("data.width"))

    def arch(self, num_classes=None):
        model = self.data["model"]
        return Arch(
            image_shape=self.image_shape(),
            hidden_dim=model["hidden_dim"],
            embed_dim=model["embed_dim"],
            num_classes=num_classes or self.get("data.num_classes"),
            mean=tuple(model["mean"]),
            std=tuple(model["std"]),
            train_temperature=model["train_temperature"],
        )

    def train_config(self):
        return TrainConfig(seed=self.get("seed"), **self.data["train"])

    def retrain_config(self):
        section = dict(self.data["train"], epochs=self.get("advtrain.epochs"), lr=self.get("advtrain.lr"))
        return TrainConfig(seed=self.get("seed") + 1, **section)

    def attack_config(self):
        section = self.data["attack"]
        return AttackConfig(
            epsilon=section["epsilon"],
            apgd_iters=section["apgd_iters"],
            apgd_restarts=section["apgd_restarts"],
            dlr_restarts=section["dlr_restarts"],
            deepfool_max_iter=section["deepfool_max_iter"],
            deepfool_overshoot=section["deepfool_overshoot"],
            fuse_weights=tuple(section["fuse_weights"]),
            seed=self.get("seed"),
        )

    def advtrain_config(self):
        return AdvTrainConfig(
            attack=self.attack_config(),
            mix=tuple(self.get("advtrain.mix")),
            val_mix=tuple(self.get("advtrain.val_mix")),
            train=self.retrain_config(),
            seed=self.get("seed"),
            threads=self.get("threads"),
        )

    def attack_kinds(self):
        kinds = self.get("attack.kinds")
        unknown = [k for k in kinds if k not in ATTACK_KINDS]
        if unknown:
            raise ConfigError(f"unknown attack kinds {unknown}", "attack.kinds")
        return tuple(kinds)

    def detector_kinds(self, section="detectors"):
        kinds = self.get(f"{section}.kinds")
        unknown = [k for k in kinds if k not in DETECTOR_KINDS]
        if unknown:
            raise ConfigError(f"unknown detector kinds {unknown}", f"{section}.kinds")
        return tuple(kinds)

    def detector_params(self, section="detectors"):
        return copy.deepcopy(self.get(f"{section}.params"))
