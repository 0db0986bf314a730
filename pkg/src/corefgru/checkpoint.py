"""Binary model checkpoints.

Layout: 4-byte magic ``CGRU``, 1-byte format version, an 8-byte
little-endian header length, a UTF-8 JSON header, then the raw tensor bytes
(float64, little-endian, C order) concatenated in header directory order.
The header carries the flat config mapping, the vocabulary, the optional
label list, and a tensor directory of names and shapes.  Round-trips are
bitwise exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import CorruptCheckpoint, IncompatibleCheckpoint, VersionError
from .tape import Parameters

MAGIC = b"CGRU"
FORMAT_VERSION = 1


class Checkpoint:
    def __init__(
        self,
        params: Parameters,
        config: dict,
        vocab: list[str],
        labels: Optional[list[str]] = None,
    ):
        self.params = params
        self.config = config
        self.vocab = vocab
        self.labels = labels


def save_checkpoint(
    path: Union[str, Path],
    params: Parameters,
    config: dict,
    vocab: list[str],
    labels: Optional[list[str]] = None,
) -> None:
    names = params.names()
    directory = []
    blobs = []
    for name in names:
        value = np.ascontiguousarray(params.value(name), dtype="<f8")
        directory.append({"name": name, "shape": list(value.shape)})
        blobs.append(value.tobytes())
    header = {
        "config": {str(k): str(v) for k, v in config.items()},
        "vocab": list(vocab),
        "labels": list(labels) if labels is not None else None,
        "tensors": directory,
    }
    header_bytes = json.dumps(header, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("B", FORMAT_VERSION))
        f.write(struct.pack("<Q", len(header_bytes)))
        f.write(header_bytes)
        for blob in blobs:
            f.write(blob)


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 1 + 8:
        raise CorruptCheckpoint(f"{path}: file too short to be a checkpoint")
    if raw[: len(MAGIC)] != MAGIC:
        raise CorruptCheckpoint(f"{path}: bad magic {raw[:4]!r}")
    version = raw[len(MAGIC)]
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    offset = len(MAGIC) + 1
    (header_len,) = struct.unpack_from("<Q", raw, offset)
    offset += 8
    if offset + header_len > len(raw):
        raise CorruptCheckpoint(f"{path}: truncated header")
    try:
        header = json.loads(raw[offset : offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptCheckpoint(f"{path}: header is not valid JSON: {e}") from e
    offset += header_len
    for key in ("config", "vocab", "tensors"):
        if key not in header:
            raise IncompatibleCheckpoint(f"{path}: header missing {key!r}")

    params = Parameters()
    for entry in header["tensors"]:
        shape = tuple(int(s) for s in entry["shape"])
        count = 1
        for s in shape:
            count *= s
        nbytes = count * 8
        if offset + nbytes > len(raw):
            raise CorruptCheckpoint(f"{path}: truncated tensor {entry['name']!r}")
        value = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape)
        params.add(entry["name"], value.astype(np.float64))
        offset += nbytes
    if offset != len(raw):
        raise CorruptCheckpoint(f"{path}: {len(raw) - offset} trailing bytes")
    return Checkpoint(
        params=params,
        config=header["config"],
        vocab=header["vocab"],
        labels=header.get("labels"),
    )
