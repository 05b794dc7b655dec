"""
Feature sets for the detectors.

Rows are image embeddings taken from the model's encoder, z-score normalized
with statistics of the training portion. Every row keeps its true label, its
clean/adversarial origin, the source sample id and a provenance tag.
"""

from dataclasses import dataclass, replace

import numpy as np
import structlog

from ..data.dataset import CLEAN
from ..errors import ConfigError, InvalidInputError, ShapeError

log = structlog.get_logger()

ENCODE_BATCH = 256


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """Normalized features plus the raw rows they were computed from."""

    features: np.ndarray
    raw: np.ndarray
    labels: np.ndarray
    adv_flags: np.ndarray
    ids: np.ndarray
    tags: tuple
    norm_mean: np.ndarray
    norm_std: np.ndarray
    num_classes: int
    original_labels: np.ndarray = None

    @property
    def N(self):
        return int(self.features.shape[0])

    @property
    def D(self):
        return int(self.features.shape[1])

    @property
    def norm_stats(self):
        return self.norm_mean, self.norm_std

    def rows(self, indices):
        """Subset by position, keeping the current normalization."""
        indices = np.asarray(indices, dtype=np.int64)
        return replace(
            self,
            features=self.features[indices],
            raw=self.raw[indices],
            labels=self.labels[indices],
            adv_flags=self.adv_flags[indices],
            ids=self.ids[indices],
            tags=tuple(self.tags[i] for i in indices),
            original_labels=None if self.original_labels is None else self.original_labels[indices],
        )

    def renormalized(self, norm_stats):
        """Same rows normalized with other (mean, std) statistics."""
        mean, std = norm_stats
        return replace(self, features=(self.raw - mean) / std, norm_mean=mean, norm_std=std)


def normalization_stats(raw):
    """Per-dimension mean and std; dimensions without variance get std 1."""
    mean = raw.mean(axis=0)
    std = raw.std(axis=0)
    std = np.where(std > 0.0, std, 1.0)
    return mean, std


def embed(model, images):
    """Encoder embeddings of a batch, computed in chunks."""
    images = np.asarray(images)
    chunks = [model.encode(images[i:i + ENCODE_BATCH]) for i in range(0, len(images), ENCODE_BATCH)]
    return np.concatenate(chunks).astype(np.float64)


def extract_features(model, images, labels, adv_flags=None, ids=None, tags=None, norm_stats=None):
    """
    Embed images and z-score the rows.

    norm_stats (mean, std) from a training portion are applied when given;
    otherwise the statistics of these rows are used.
    """
    images = np.asarray(images)
    if images.ndim != 4 or images.shape[0] == 0:
        raise InvalidInputError(f"expected a nonempty (N,C,H,W) image batch, got shape {images.shape}")
    n = images.shape[0]
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    adv_flags = np.zeros(n, dtype=bool) if adv_flags is None else np.asarray(adv_flags, dtype=bool).reshape(-1)
    ids = np.arange(n, dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64).reshape(-1)
    tags = tuple("adversarial" if flag else CLEAN for flag in adv_flags) if tags is None else tuple(tags)
    if not (len(labels) == len(adv_flags) == len(ids) == len(tags) == n):
        raise ShapeError(f"{n} images but {len(labels)} labels, {len(adv_flags)} flags, {len(ids)} ids, {len(tags)} tags")

    raw = embed(model, images)
    mean, std = normalization_stats(raw) if norm_stats is None else norm_stats
    return FeatureSet(
        features=(raw - mean) / std,
        raw=raw,
        labels=labels,
        adv_flags=adv_flags,
        ids=ids,
        tags=tags,
        norm_mean=np.asarray(mean, dtype=np.float64),
        norm_std=np.asarray(std, dtype=np.float64),
        num_classes=model.num_classes,
    )


def feature_set_from_attacks(model, dataset, adversarial):
    """
    Clean rows of dataset followed by the rows of every attack in adversarial
    ({kind: [AdvExample]}, kinds in sorted order). Adversarial rows keep the
    true label and source id and are tagged with the attack kind.
    """
    images = [dataset.images.astype(np.float64)]
    labels, ids = [dataset.labels], [dataset.ids]
    flags = [np.zeros(dataset.N, dtype=bool)]
    tags = [CLEAN] * dataset.N
    for kind in sorted(adversarial):
        examples = adversarial[kind]
        if not examples:
            continue
        images.append(np.stack([e.adv_pixels for e in examples]))
        labels.append(np.array([e.label for e in examples]))
        ids.append(np.array([e.original_id for e in examples]))
        flags.append(np.ones(len(examples), dtype=bool))
        tags += [kind] * len(examples)

    features = extract_features(
        model,
        np.concatenate(images),
        np.concatenate(labels),
        adv_flags=np.concatenate(flags),
        ids=np.concatenate(ids),
        tags=tags,
    )
    log.info("features extracted", n=features.N, dim=features.D, adversarial=int(features.adv_flags.sum()))
    return features


def split_features(features, train_fraction, seed):
    """
    Seeded split by source sample id, so a clean image and its adversarial
    versions land on the same side. Both parts are normalized with the
    statistics of the training part.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must lie in (0,1), got {train_fraction}", "detectors.train_fraction")
    unique_ids = np.unique(features.ids)
    if len(unique_ids) < 2:
        raise InvalidInputError("need rows from at least two source samples to split")

    order = np.random.default_rng(seed).permutation(unique_ids)
    n_train = min(max(int(np.floor(train_fraction * len(order))), 1), len(order) - 1)
    in_train = np.isin(features.ids, order[:n_train])
    train = features.rows(np.flatnonzero(in_train))
    held_out = features.rows(np.flatnonzero(~in_train))

    stats = normalization_stats(train.raw)
    return train.renormalized(stats), held_out.renormalized(stats)


def detection_task(features):
    """Relabel rows as clean (0) / adversarial (1); true labels move to original_labels."""
    original = features.labels if features.original_labels is None else features.original_labels
    return replace(
        features,
        labels=features.adv_flags.astype(np.int64),
        original_labels=original,
        num_classes=2,
    )
