"""
Dataset files in the shared container format (magic ADAT).

Records are (id int64, label int64, tag index int32, float32 pixels), packed
little-endian in dataset order.
"""

import numpy as np

from ..errors import TruncatedBlobError
from ..utils.container import read_container, write_container
from .dataset import LabeledDataset

MAGIC = b"ADAT"
VERSION = 1


def _record_dtype(image_shape):
    return np.dtype([
        ("id", "<i8"),
        ("label", "<i8"),
        ("tag", "<i4"),
        ("pixels", "<f4", tuple(image_shape)),
    ])


def save_dataset(dataset, path):
    """Write a dataset file."""
    tag_names = sorted(set(dataset.tags.astype(str).tolist()))
    tag_index = {name: i for i, name in enumerate(tag_names)}

    records = np.zeros(dataset.N, dtype=_record_dtype(dataset.image_shape))
    records["id"] = dataset.ids
    records["label"] = dataset.labels
    records["tag"] = [tag_index[str(t)] for t in dataset.tags]
    records["pixels"] = dataset.images

    metadata = {
        "class_names": list(dataset.class_names),
        "source": dataset.source.value,
        "image_shape": list(dataset.image_shape),
        "tags": tag_names,
        "n": dataset.N,
    }
    write_container(path, MAGIC, VERSION, metadata, records.tobytes())


def load_dataset(path):
    """Read a dataset file."""
    metadata, blob = read_container(path, MAGIC, VERSION)
    dtype = _record_dtype(metadata["image_shape"])
    if len(blob) != metadata["n"] * dtype.itemsize:
        raise TruncatedBlobError(f"{path}: record blob does not hold {metadata['n']} records")

    records = np.frombuffer(blob, dtype=dtype)
    tag_names = metadata["tags"]
    return LabeledDataset(
        np.array(records["pixels"], dtype=np.float32).reshape((-1,) + tuple(metadata["image_shape"])),
        records["label"],
        records["id"],
        metadata["class_names"],
        metadata["source"],
        tags=[tag_names[i] for i in records["tag"]],
    )
