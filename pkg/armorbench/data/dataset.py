"""
Dataset types for ArmorBench.
Images are channel-first float arrays with every pixel in [0,1]. Datasets are
immutable once built, so they can be shared between threads freely.
"""

import enum
from dataclasses import dataclass

import numpy as np
import structlog

from ..errors import ConfigError, InvalidInputError, LabelIndexError, ShapeError
from ..utils.image import resize_chw

log = structlog.get_logger()

CLEAN = "clean"

DEFAULT_MEAN = (0.5, 0.5, 0.5)
DEFAULT_STD = (0.5, 0.5, 0.5)


class DataSource(str, enum.Enum):
    """Where a dataset came from."""

    CIFAR10 = "cifar10"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class ImageSample:
    """One image with its true label and a stable identifier."""

    pixels: np.ndarray
    label: int
    id: int
    tag: str = CLEAN

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 3:
            raise ShapeError(f"sample {self.id}: expected CxHxW pixels, got shape {pixels.shape}")
        if pixels.size and not (np.all(pixels >= 0.0) and np.all(pixels <= 1.0)):
            raise InvalidInputError(f"sample {self.id}: pixel values must lie in [0,1]")
        if self.label < 0:
            raise LabelIndexError(f"sample {self.id}: negative label {self.label}")


class LabeledDataset:
    """
    Ordered collection of labelled images plus the class-name table.

    Arrays are stored read-only: images (N,C,H,W) float32, labels (N,) int64,
    ids (N,) int64 strictly increasing, tags (N,) provenance strings.
    """

    def __init__(self, images, labels, ids, class_names, source, tags=None):
        """Validate and freeze the arrays."""
        images = np.array(images, dtype=np.float32)
        labels = np.array(labels, dtype=np.int64).reshape(-1)
        ids = np.array(ids, dtype=np.int64).reshape(-1)
        class_names = tuple(str(name) for name in class_names)
        if tags is None:
            tags = [CLEAN] * len(labels)
        tags = np.array([str(t) for t in tags], dtype=object).reshape(-1)

        if images.ndim != 4:
            raise ShapeError(f"expected images of shape (N,C,H,W), got {images.shape}")
        n = images.shape[0]
        if not (len(labels) == len(ids) == len(tags) == n):
            raise ShapeError(
                f"length mismatch: {n} images, {len(labels)} labels, {len(ids)} ids, {len(tags)} tags"
            )
        if len(class_names) < 1:
            raise InvalidInputError("a dataset needs at least one class name")
        if n:
            if not np.all(np.isfinite(images)) or images.min() < 0.0 or images.max() > 1.0:
                raise InvalidInputError("pixel values must lie in [0,1]")
            if labels.min() < 0 or labels.max() >= len(class_names):
                bad = int(np.flatnonzero((labels < 0) | (labels >= len(class_names)))[0])
                raise LabelIndexError(
                    f"label {labels[bad]} of sample {ids[bad]} outside [0, {len(class_names)})"
                )
            if n > 1 and not np.all(np.diff(ids) > 0):
                raise InvalidInputError("sample ids must be unique and strictly increasing")

        for array in (images, labels, ids, tags):
            array.flags.writeable = False

        self.images = images
        self.labels = labels
        self.ids = ids
        self.tags = tags
        self.class_names = class_names
        self.source = DataSource(source)

    @property
    def N(self):
        """Number of samples."""
        return int(self.images.shape[0])

    @property
    def num_classes(self):
        """Number of classes K."""
        return len(self.class_names)

    @property
    def image_shape(self):
        """Per-image (C, H, W)."""
        return tuple(int(d) for d in self.images.shape[1:])

    @property
    def samples(self):
        """All samples as a list of ImageSample."""
        return [self[i] for i in range(self.N)]

    def __len__(self):
        return self.N

    def __getitem__(self, index):
        return ImageSample(
            pixels=self.images[index],
            label=int(self.labels[index]),
            id=int(self.ids[index]),
            tag=str(self.tags[index]),
        )

    def __iter__(self):
        for i in range(self.N):
            yield self[i]

    def subset(self, indices):
        """Dataset of the given positions, kept in id order."""
        indices = np.sort(np.asarray(indices, dtype=np.int64))
        return LabeledDataset(
            self.images[indices],
            self.labels[indices],
            self.ids[indices],
            self.class_names,
            self.source,
            tags=self.tags[indices],
        )

    def head(self, n):
        """The first n samples."""
        return self.subset(np.arange(min(n, self.N)))

    def with_images(self, images, tags=None):
        """Same labels and ids with replaced pixels (and optionally tags)."""
        return LabeledDataset(
            images,
            self.labels,
            self.ids,
            self.class_names,
            self.source,
            tags=self.tags if tags is None else tags,
        )

    def tag_counts(self):
        """Number of samples per provenance tag."""
        names, counts = np.unique(self.tags.astype(str), return_counts=True)
        return {str(name): int(count) for name, count in zip(names, counts)}

    def __repr__(self):
        return (
            f"LabeledDataset(N={self.N}, K={self.num_classes}, "
            f"shape={self.image_shape}, source={self.source.value})"
        )


def _channel_stats(mean, std, channels):
    mean = np.asarray(mean, dtype=np.float64).reshape(-1)
    std = np.asarray(std, dtype=np.float64).reshape(-1)
    if mean.shape != (channels,) or std.shape != (channels,):
        raise ConfigError(f"mean and std need {channels} components")
    if not np.all(std > 0.0):
        raise ConfigError("std components must be strictly positive")
    return mean[:, None, None], std[:, None, None]


def normalize(sample, mean=DEFAULT_MEAN, std=DEFAULT_STD):
    """Per-channel (x - mean) / std. Accepts an ImageSample or a CxHxW array."""
    pixels = np.asarray(getattr(sample, "pixels", sample), dtype=np.float64)
    mean, std = _channel_stats(mean, std, pixels.shape[0])
    return (pixels - mean) / std


def denormalize(tensor, mean=DEFAULT_MEAN, std=DEFAULT_STD):
    """Inverse of normalize."""
    tensor = np.asarray(tensor, dtype=np.float64)
    mean, std = _channel_stats(mean, std, tensor.shape[0])
    return tensor * std + mean


def split(dataset, train_fraction, seed):
    """
    Seeded train/validation split.

    The first floor(train_fraction * N) positions of a seeded permutation go
    to training; both parts stay in id order.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must lie in (0,1), got {train_fraction}")
    if dataset.N == 0:
        raise InvalidInputError("cannot split an empty dataset")

    order = np.random.default_rng(seed).permutation(dataset.N)
    n_train = int(np.floor(train_fraction * dataset.N))
    train, val = dataset.subset(order[:n_train]), dataset.subset(order[n_train:])
    log.debug("dataset split", n_train=train.N, n_val=val.N, seed=seed)
    return train, val


def resize_dataset(dataset, height, width):
    """Resize every image to height x width; identity if already that size."""
    if height < 1 or width < 1:
        raise ConfigError(f"image size must be positive, got {height}x{width}")
    if dataset.image_shape[1:] == (height, width):
        return dataset
    if dataset.N == 0:
        images = np.zeros((0, dataset.image_shape[0], height, width), dtype=np.float32)
    else:
        images = np.stack([resize_chw(img, height, width) for img in dataset.images])
    log.info("dataset resized", n=dataset.N, height=height, width=width)
    return dataset.with_images(images)
