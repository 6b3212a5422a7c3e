"""Self-describing binary checkpoint: magic header, JSON manifest, raw tensors.

Layout: 4-byte magic, 4-byte little-endian version, 8-byte little-endian
manifest length, UTF-8 JSON manifest (config, vocabulary word list, tensor
names and shapes), then each tensor's float64 little-endian bytes in
manifest order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict

import numpy as np

from ..corpus import Vocabulary
from ..diffmath import Tensor
from .model import GeneratorConfig, HashtagGenerator

MAGIC = b"NTCK"
VERSION = 1


class CheckpointError(ValueError):
    """Corrupt, truncated, or incompatible checkpoint file."""


def save_checkpoint(path: str, model: HashtagGenerator) -> None:
    names = sorted(model.params)
    manifest = {
        "config": asdict(model.config),
        "vocab": model.vocab.word_tokens(),
        "tensors": [
            {"name": name, "shape": list(model.params[name].data.shape)}
            for name in names
        ],
    }
    payload = json.dumps(manifest, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(payload)))
        fh.write(payload)
        for name in names:
            fh.write(np.ascontiguousarray(model.params[name].data, dtype="<f8").tobytes())


def load_checkpoint(path: str) -> HashtagGenerator:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise CheckpointError(f"bad magic {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        try:
            manifest = json.loads(fh.read(header_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"corrupt manifest: {exc}") from None
        config = GeneratorConfig(**manifest["config"])
        vocab = Vocabulary.from_word_tokens(manifest["vocab"])
        model = HashtagGenerator(config, vocab, seed=0)
        for entry in manifest["tensors"]:
            name, shape = entry["name"], tuple(entry["shape"])
            if name not in model.params:
                raise CheckpointError(f"unknown tensor {name!r}")
            expected = model.params[name].data.shape
            if shape != expected:
                raise CheckpointError(
                    f"tensor {name!r} shape {shape} != expected {expected}"
                )
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise CheckpointError(f"truncated data for tensor {name!r}")
            model.params[name] = Tensor(
                np.frombuffer(raw, dtype="<f8").reshape(shape).copy(),
                requires_grad=True,
            )
    return model
