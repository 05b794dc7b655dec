"""
Model checkpoints (magic AVLM, version 1).

The parameter blob is every parameter as little-endian float32, concatenated
in the order W1, b1, W2, b2, E, each flattened row-major.
"""

import numpy as np
import structlog

from ..errors import TruncatedBlobError
from ..utils.container import read_container, write_container
from .dual_encoder import PARAM_ORDER, Arch, DualEncoderModel

log = structlog.get_logger()

MAGIC = b"AVLM"
VERSION = 1


def checkpoint_metadata(model):
    return {
        "arch": model.arch.to_dict(),
        "num_classes": model.num_classes,
        "class_names": list(model.class_names),
        "temperature": model.temperature,
        "seed": model.seed,
        "param_order": list(PARAM_ORDER),
    }


def save_checkpoint(model, path):
    """Write a model checkpoint."""
    blob = b"".join(
        np.ascontiguousarray(model.params[name], dtype="<f4").tobytes() for name in PARAM_ORDER
    )
    write_container(path, MAGIC, VERSION, checkpoint_metadata(model), blob)
    log.debug("checkpoint saved", path=str(path), parameters=model.parameter_count)


def load_checkpoint(path):
    """Read a model checkpoint written by save_checkpoint."""
    metadata, blob = read_container(path, MAGIC, VERSION)
    arch = Arch.from_dict(metadata["arch"])
    shapes = arch.param_shapes()

    expected = sum(int(np.prod(shapes[name])) for name in PARAM_ORDER) * 4
    if len(blob) != expected:
        raise TruncatedBlobError(f"{path}: parameter blob holds {len(blob)} bytes, expected {expected}")

    params = {}
    offset = 0
    for name in PARAM_ORDER:
        count = int(np.prod(shapes[name]))
        params[name] = np.frombuffer(blob, dtype="<f4", count=count, offset=offset).reshape(shapes[name])
        offset += count * 4

    return DualEncoderModel(
        arch,
        params,
        temperature=metadata["temperature"],
        seed=metadata["seed"],
        class_names=metadata["class_names"],
    )
