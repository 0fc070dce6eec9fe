"""Checkpoint serialization: one JSON header line, then raw float32 tensors.

The header carries the model config, the vocabulary's content hash, and a
manifest of (name, shape) pairs in the exact order the raw little-endian
float32 arrays follow.  Writing the same checkpoint twice is byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import util
from ..corpus import Vocab
from ..errors import MalformedRecord, VocabMismatch
from .config import ModelConfig, init_params, parameter_shapes

_FORMAT = "chronolm-checkpoint-v1"


@dataclass
class EncoderCheckpoint:
    config: ModelConfig
    params: dict[str, np.ndarray]
    vocab_sha256: str
    vocab: Optional[Vocab] = None

    @classmethod
    def fresh(cls, config: ModelConfig, vocab: Vocab, dtype=np.float32) -> "EncoderCheckpoint":
        if config.vocab_size != vocab.size:
            raise ValueError("config vocab_size must match the vocabulary")
        return cls(config, init_params(config, dtype=dtype),
                   vocab.content_hash(), vocab)


def save_checkpoint(ckpt: EncoderCheckpoint, path: str) -> None:
    expected = parameter_shapes(ckpt.config)
    if set(expected) != set(ckpt.params):
        missing = sorted(set(expected) ^ set(ckpt.params))
        raise ValueError(f"parameter set does not match config: {missing}")
    manifest = [[name, list(expected[name])] for name in sorted(expected)]
    header = {
        "format": _FORMAT,
        "config": ckpt.config.to_json(),
        "vocab_sha256": ckpt.vocab_sha256,
        "manifest": manifest,
    }
    blob = bytearray()
    blob += (json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")
    for name, shape in manifest:
        tensor = np.ascontiguousarray(ckpt.params[name], dtype="<f4")
        if list(tensor.shape) != shape:
            raise ValueError(f"tensor {name} has shape {tensor.shape}, expected {shape}")
        blob += tensor.tobytes()
    util.atomic_write_bytes(path, bytes(blob))


def load_checkpoint(
    path: str,
    vocab: Optional[Vocab] = None,
    dtype=np.float32,
) -> EncoderCheckpoint:
    """Read a checkpoint; verifies the vocabulary hash when one is supplied."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise MalformedRecord(f"{path}: not a checkpoint header") from None
        if header.get("format") != _FORMAT:
            raise MalformedRecord(f"{path}: unknown checkpoint format")
        config = ModelConfig.from_json(header["config"])
        params: dict[str, np.ndarray] = {}
        for name, shape in header["manifest"]:
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(4 * count)
            if len(raw) != 4 * count:
                raise MalformedRecord(f"{path}: truncated tensor {name}")
            arr = np.frombuffer(raw, dtype="<f4").reshape(shape)
            params[name] = arr.astype(dtype)
        if fh.read(1):
            raise MalformedRecord(f"{path}: trailing bytes after manifest")
    if vocab is not None and vocab.content_hash() != header["vocab_sha256"]:
        raise VocabMismatch(
            f"{path}: checkpoint was built against a different vocabulary"
        )
    return EncoderCheckpoint(config, params, header["vocab_sha256"], vocab)
