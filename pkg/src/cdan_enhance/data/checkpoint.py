"""Versioned named-tensor archive used for checkpoints and extractor weights.

Byte layout, all little-endian:

    magic            8 bytes  b"CDANCKPT"
    version          u32
    meta length      u32, then that many bytes of UTF-8 JSON
    record count     u32
    per record:
        name length  u32, then UTF-8 name
        ndim         u32
        dims         ndim x u64
        payload      prod(dims) x float64
"""

import json
import logging
import os
import struct
from collections import OrderedDict
from typing import TYPE_CHECKING, Dict, Tuple

import numpy as np

from cdan_enhance.core.models.errors import (
    CheckpointVersionError,
    CorruptCheckpointError,
)
from cdan_enhance.core.models.schema import CheckpointMeta

if TYPE_CHECKING:
    from cdan_enhance.modules.model.cdan_model import CdanModel

logger = logging.getLogger(__name__)

MAGIC = b"CDANCKPT"
FORMAT_VERSION = 1
CHECKPOINT_SUFFIX = ".cdan"
_PAYLOAD_DTYPE = np.dtype("<f8")


def write_archive(path: str, tensors: Dict[str, np.ndarray], meta: dict):
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    parts = [
        MAGIC,
        struct.pack("<I", FORMAT_VERSION),
        struct.pack("<I", len(meta_bytes)),
        meta_bytes,
        struct.pack("<I", len(tensors)),
    ]
    for name, array in tensors.items():
        name_bytes = name.encode("utf-8")
        parts.append(struct.pack("<I", len(name_bytes)))
        parts.append(name_bytes)
        parts.append(struct.pack("<I", array.ndim))
        parts.append(struct.pack(f"<{array.ndim}Q", *array.shape))
        parts.append(np.ascontiguousarray(array, dtype=_PAYLOAD_DTYPE).tobytes())

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    tmp_path = f"{path}.tmp"
    with open(tmp_path, "wb") as f:
        f.write(b"".join(parts))
    os.replace(tmp_path, path)


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.path = path
        self.offset = 0

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if end > len(self.data):
            raise CorruptCheckpointError(
                f"Archive {self.path} is truncated at byte {self.offset}"
            )
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def read_archive(path: str) -> Tuple[dict, "OrderedDict[str, np.ndarray]"]:
    with open(path, "rb") as f:
        reader = _Reader(f.read(), path)
    if reader.take(len(MAGIC)) != MAGIC:
        raise CorruptCheckpointError(f"{path} is not a CDAN archive (bad magic)")
    version = reader.u32()
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"Archive {path} has format version {version}, expected {FORMAT_VERSION}"
        )
    try:
        meta = json.loads(reader.take(reader.u32()).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as ex:
        raise CorruptCheckpointError(f"Archive {path} has unreadable metadata") from ex

    tensors = OrderedDict()
    for _ in range(reader.u32()):
        name = reader.take(reader.u32()).decode("utf-8")
        ndim = reader.u32()
        dims = struct.unpack(f"<{ndim}Q", reader.take(8 * ndim))
        count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
        payload = reader.take(count * _PAYLOAD_DTYPE.itemsize)
        tensors[name] = (
            np.frombuffer(payload, dtype=_PAYLOAD_DTYPE).astype(np.float64).reshape(dims)
        )
    if reader.offset != len(reader.data):
        raise CorruptCheckpointError(f"Archive {path} has trailing bytes")
    return meta, tensors


def save_checkpoint(model: "CdanModel", meta: CheckpointMeta, path: str):
    write_archive(path, model.state_dict(), meta.model_dump())
    logger.info(
        f"[Checkpoint] Saved epoch {meta.epoch} step {meta.step} to {path}."
    )


def load_checkpoint(path: str) -> Tuple["CdanModel", CheckpointMeta]:
    from cdan_enhance.modules.model.cdan_model import CdanModel
    from cdan_enhance.modules.nn.layers import load_state

    raw_meta, tensors = read_archive(path)
    try:
        meta = CheckpointMeta(**raw_meta)
    except ValueError as ex:
        raise CorruptCheckpointError(f"Archive {path} has invalid metadata: {ex}") from ex
    model = CdanModel(meta.config, meta.seed)
    load_state(model, tensors)
    model.eval()
    logger.info(f"[Checkpoint] Loaded {path} (epoch {meta.epoch}, step {meta.step}).")
    return model, meta


def load_checkpoint_into(model: "CdanModel", path: str) -> CheckpointMeta:
    from cdan_enhance.modules.nn.layers import load_state

    raw_meta, tensors = read_archive(path)
    load_state(model, tensors)
    return CheckpointMeta(**raw_meta)
