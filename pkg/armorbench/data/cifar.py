"""
CIFAR-10 binary batch format.

Each record is 1 label byte followed by 3072 pixel bytes: the 1024-byte red
plane, then green, then blue, each a row-major 32x32 image. There is no header;
a standard batch file holds 10,000 records.
"""

import glob
import os

import numpy as np
import structlog

from ..errors import CorruptRecordError, DataFormatError, InvalidInputError
from .dataset import DataSource, LabeledDataset

log = structlog.get_logger()

CIFAR10_CLASSES = (
    "airplane",
    "automobile",
    "bird",
    "cat",
    "deer",
    "dog",
    "frog",
    "horse",
    "ship",
    "truck",
)

IMAGE_SHAPE = (3, 32, 32)
PIXEL_BYTES = 3 * 32 * 32
RECORD_BYTES = 1 + PIXEL_BYTES


def parse_cifar10_batch(raw_bytes, first_id=0):
    """Decode a CIFAR-10 binary buffer into a dataset with ids first_id, first_id+1, ..."""
    raw = np.frombuffer(bytes(raw_bytes), dtype=np.uint8)
    if raw.size == 0 or raw.size % RECORD_BYTES != 0:
        raise DataFormatError(
            f"buffer length {raw.size} is not a positive multiple of {RECORD_BYTES}"
        )

    records = raw.reshape(-1, RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    bad = np.flatnonzero(labels >= len(CIFAR10_CLASSES))
    if bad.size:
        raise CorruptRecordError(f"label byte {labels[bad[0]]} is not below 10", int(bad[0]))

    images = records[:, 1:].reshape((-1,) + IMAGE_SHAPE).astype(np.float32) / np.float32(255.0)
    ids = np.arange(first_id, first_id + len(labels), dtype=np.int64)
    return LabeledDataset(images, labels, ids, CIFAR10_CLASSES, DataSource.CIFAR10)


def serialize_cifar10_batch(dataset):
    """Encode a 10-class 3x32x32 dataset back into CIFAR-10 binary bytes."""
    if dataset.image_shape != IMAGE_SHAPE or dataset.num_classes > len(CIFAR10_CLASSES):
        raise InvalidInputError(
            f"CIFAR-10 records need 3x32x32 images and at most 10 classes, got "
            f"{dataset.image_shape} with {dataset.num_classes} classes"
        )
    records = np.empty((dataset.N, RECORD_BYTES), dtype=np.uint8)
    records[:, 0] = dataset.labels.astype(np.uint8)
    pixels = np.rint(dataset.images.astype(np.float64) * 255.0)
    records[:, 1:] = pixels.reshape(dataset.N, PIXEL_BYTES).astype(np.uint8)
    return records.tobytes()


def load_cifar10(path):
    """
    Load a CIFAR-10 binary batch file, or every *.bin batch in a directory.

    Batches from a directory are concatenated in file-name order with ids
    continuing across files.
    """
    if os.path.isdir(path):
        files = sorted(glob.glob(os.path.join(path, "*.bin")))
        if not files:
            raise InvalidInputError(f"no *.bin batch files found in {path}")
    else:
        files = [path]

    parts = []
    next_id = 0
    for filename in files:
        with open(filename, "rb") as f:
            part = parse_cifar10_batch(f.read(), first_id=next_id)
        log.info("cifar batch loaded", file=os.path.basename(filename), n=part.N)
        parts.append(part)
        next_id += part.N

    if len(parts) == 1:
        return parts[0]
    return LabeledDataset(
        np.concatenate([p.images for p in parts]),
        np.concatenate([p.labels for p in parts]),
        np.concatenate([p.ids for p in parts]),
        CIFAR10_CLASSES,
        DataSource.CIFAR10,
    )
