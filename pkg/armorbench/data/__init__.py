"""Datasets: CIFAR-10 batches, synthetic images, annotations and storage."""

from .annotations import AnnotationRecord, export_images, read_annotations, write_annotations
from .cifar import load_cifar10, parse_cifar10_batch, serialize_cifar10_batch
from .dataset import (
    CLEAN,
    DataSource,
    ImageSample,
    LabeledDataset,
    denormalize,
    normalize,
    resize_dataset,
    split,
)
from .storage import load_dataset, save_dataset
from .synthetic import gen_synthetic
