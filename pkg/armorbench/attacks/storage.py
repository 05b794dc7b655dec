"""
Adversarial set files (magic AADV, version 1).

Metadata holds the attack config plus the chain and stage tables; each record
is id, label, chain index, stage index, float32 pixels, then linf and l2
norms, success flag, predicted label and iteration count.
"""

import numpy as np

from ..errors import InvalidInputError, TruncatedBlobError
from ..utils.container import read_container, write_container
from .base import AdvExample

MAGIC = b"AADV"
VERSION = 1


def _record_dtype(image_shape):
    return np.dtype([
        ("id", "<i8"),
        ("label", "<i8"),
        ("chain", "<i4"),
        ("stage", "<i4"),
        ("pixels", "<f4", tuple(image_shape)),
        ("linf", "<f8"),
        ("l2", "<f8"),
        ("success", "u1"),
        ("predicted", "<i8"),
        ("iterations", "<i4"),
    ])


def save_adversarial_set(examples, path, config=None, image_shape=None):
    """Write adversarial examples; image_shape is required for an empty set."""
    examples = list(examples)
    if examples:
        image_shape = examples[0].adv_pixels.shape
    elif image_shape is None:
        raise InvalidInputError("image_shape is required to save an empty adversarial set")

    chains = sorted({tuple(e.chain) for e in examples})
    stages = sorted({e.stage for e in examples})
    records = np.zeros(len(examples), dtype=_record_dtype(image_shape))
    if examples:
        records["id"] = [e.original_id for e in examples]
        records["label"] = [e.label for e in examples]
        records["chain"] = [chains.index(tuple(e.chain)) for e in examples]
        records["stage"] = [stages.index(e.stage) for e in examples]
        records["pixels"] = np.stack([e.adv_pixels for e in examples])
        records["linf"] = [e.linf_norm for e in examples]
        records["l2"] = [e.l2_norm for e in examples]
        records["success"] = [int(e.success) for e in examples]
        records["predicted"] = [e.predicted_label for e in examples]
        records["iterations"] = [e.iterations for e in examples]

    metadata = {
        "config": config.to_dict() if config is not None else {},
        "chains": [list(c) for c in chains],
        "stages": stages,
        "image_shape": list(image_shape),
        "n": len(examples),
    }
    write_container(path, MAGIC, VERSION, metadata, records.tobytes())


def load_adversarial_set(path):
    """Read adversarial examples; returns (examples, metadata)."""
    metadata, blob = read_container(path, MAGIC, VERSION)
    dtype = _record_dtype(metadata["image_shape"])
    if len(blob) != metadata["n"] * dtype.itemsize:
        raise TruncatedBlobError(f"{path}: record blob does not hold {metadata['n']} records")

    records = np.frombuffer(blob, dtype=dtype)
    chains = [tuple(c) for c in metadata["chains"]]
    examples = [
        AdvExample(
            original_id=int(r["id"]),
            label=int(r["label"]),
            adv_pixels=np.array(r["pixels"], dtype=np.float64),
            chain=chains[int(r["chain"])],
            linf_norm=float(r["linf"]),
            l2_norm=float(r["l2"]),
            success=bool(r["success"]),
            predicted_label=int(r["predicted"]),
            stage=metadata["stages"][int(r["stage"])],
            iterations=int(r["iterations"]),
        )
        for r in records
    ]
    return examples, metadata
