"""
Annotation files mapping image files to labels.

CSV with header `filename,label_index,label_text`, UTF-8, LF line endings.
Filenames are `img_<id:06d>.png`; export_images writes those files.
"""

import csv
import os
from dataclasses import dataclass

import structlog

from ..errors import AnnotationParseError, InvalidInputError
from ..utils.image import save_png

log = structlog.get_logger()

HEADER = ("filename", "label_index", "label_text")


@dataclass(frozen=True)
class AnnotationRecord:
    filename: str
    label_index: int
    label_text: str


def image_filename(sample_id):
    """File name used for a sample in annotations and exported images."""
    return f"img_{sample_id:06d}.png"


def annotation_records(dataset):
    """One record per sample, in dataset order."""
    return [
        AnnotationRecord(image_filename(int(i)), int(y), dataset.class_names[int(y)])
        for i, y in zip(dataset.ids, dataset.labels)
    ]


def write_annotations(dataset, path):
    """Write the annotation CSV for a dataset."""
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(HEADER)
        for record in annotation_records(dataset):
            writer.writerow((record.filename, record.label_index, record.label_text))


def read_annotations(path, class_names=None):
    """
    Read an annotation CSV back into records.

    If class_names is given, every label_text is checked against it.
    """
    records = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header) != HEADER:
            raise AnnotationParseError(f"expected header {','.join(HEADER)}", 1)

        for line_number, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise AnnotationParseError(f"expected 3 fields, got {len(row)}", line_number)
            filename, label_index, label_text = row
            try:
                label_index = int(label_index)
            except ValueError:
                raise AnnotationParseError(
                    f"label_index {label_index!r} is not an integer", line_number
                ) from None
            if class_names is not None:
                if not 0 <= label_index < len(class_names):
                    raise AnnotationParseError(f"label_index {label_index} out of range", line_number)
                if class_names[label_index] != label_text:
                    raise AnnotationParseError(
                        f"label_text {label_text!r} does not match class {class_names[label_index]!r}",
                        line_number,
                    )
            records.append(AnnotationRecord(filename, label_index, label_text))
    return records


def export_images(dataset, directory):
    """Write every sample as a PNG named like its annotation record."""
    if dataset.N == 0:
        raise InvalidInputError("nothing to export from an empty dataset")
    os.makedirs(directory, exist_ok=True)
    for sample in dataset:
        save_png(sample.pixels, os.path.join(directory, image_filename(sample.id)))
    log.info("images exported", n=dataset.N, directory=str(directory))
