"""
Binary container shared by checkpoints, datasets, adversarial sets and detectors.

Layout (all little-endian):
    4 bytes   magic tag (e.g. b"AVLM")
    uint32    format version
    uint64    length of the JSON metadata block
    ...       UTF-8 JSON metadata (sorted keys)
    ...       raw payload blob; its length is stored in metadata["blob_length"]
"""

import json
import os
import struct

from ..errors import BadMagicError, TruncatedBlobError, VersionMismatchError

HEADER = struct.Struct("<4sIQ")


def encode_container(magic, version, metadata, blob):
    """Build container bytes."""
    if len(magic) != 4:
        raise ValueError(f"magic tag must be 4 bytes, got {magic!r}")
    meta = dict(metadata)
    meta["blob_length"] = len(blob)
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return HEADER.pack(magic, version, len(meta_bytes)) + meta_bytes + bytes(blob)


def decode_container(data, magic, version):
    """Split container bytes into (metadata, blob), validating every length."""
    if len(data) < HEADER.size:
        raise TruncatedBlobError(f"file holds {len(data)} bytes, header needs {HEADER.size}")

    found_magic, found_version, meta_len = HEADER.unpack_from(data, 0)
    if found_magic != magic:
        raise BadMagicError(f"expected magic {magic!r}, found {found_magic!r}")
    if found_version != version:
        raise VersionMismatchError(f"expected version {version}, found {found_version}")

    meta_end = HEADER.size + meta_len
    if len(data) < meta_end:
        raise TruncatedBlobError("metadata block is truncated")
    metadata = json.loads(data[HEADER.size:meta_end].decode("utf-8"))

    blob_length = metadata.pop("blob_length", None)
    blob = data[meta_end:]
    if blob_length is None or len(blob) != blob_length:
        raise TruncatedBlobError(
            f"payload holds {len(blob)} bytes, metadata declares {blob_length}"
        )
    return metadata, bytes(blob)


def write_container(path, magic, version, metadata, blob):
    """Write a container file, creating parent directories."""
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as f:
        f.write(encode_container(magic, version, metadata, blob))


def read_container(path, magic, version):
    """Read and validate a container file."""
    with open(path, "rb") as f:
        data = f.read()
    return decode_container(data, magic, version)
