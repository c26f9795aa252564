"""SCKP binary container: checkpoints and backbone exports.

Layout (little-endian):
    magic    4 bytes  "SCKP"
    version  u16      currently 1
    meta     u32 length + UTF-8 JSON
    blobs    repeated until EOF:
                 name  u16 length + UTF-8
                 rank  u8
                 dims  rank * u32
                 data  prod(dims) float32

Blobs are written in sorted name order so identical states serialize to
identical bytes.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import CheckpointError
from .model.config import ModelConfig
from .model.params import param_shapes

MAGIC = b"SCKP"
VERSION = 1


def write_container(path, meta: dict, blobs: dict[str, np.ndarray]) -> None:
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", VERSION))
        fh.write(struct.pack("<I", len(meta_bytes)))
        fh.write(meta_bytes)
        for name in sorted(blobs):
            arr = np.ascontiguousarray(blobs[name], dtype="<f4")
            name_b = name.encode("utf-8")
            fh.write(struct.pack("<H", len(name_b)))
            fh.write(name_b)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def read_container(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 10 or raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a SCKP file")
    (version,) = struct.unpack_from("<H", raw, 4)
    if version != VERSION:
        raise CheckpointError(
            f"{path}: format version {version}, this build reads version {VERSION}"
        )
    (meta_len,) = struct.unpack_from("<I", raw, 6)
    offset = 10
    try:
        meta = json.loads(raw[offset : offset + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt metadata block ({exc})") from exc
    offset += meta_len
    blobs: dict[str, np.ndarray] = {}
    try:
        while offset < len(raw):
            (name_len,) = struct.unpack_from("<H", raw, offset)
            offset += 2
            name = raw[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<B", raw, offset)
            offset += 1
            dims = struct.unpack_from(f"<{rank}I", raw, offset)
            offset += 4 * rank
            count = int(np.prod(dims)) if rank else 1
            end = offset + 4 * count
            if end > len(raw):
                raise CheckpointError(f"{path}: truncated blob {name!r}")
            blobs[name] = (
                np.frombuffer(raw[offset:end], dtype="<f4").reshape(dims).copy()
            )
            offset = end
    except struct.error as exc:
        raise CheckpointError(f"{path}: truncated file ({exc})") from exc
    return meta, blobs


BACKBONE_COMPONENTS = {"phonetic": "phon", "acoustic": "acou"}


def backbone_param_names(config: ModelConfig, which: str) -> list[str]:
    side = BACKBONE_COMPONENTS[which]
    names = [n for n in param_shapes(config) if n.startswith(f"{side}.")]
    return names


def export_backbone(params: dict, config: ModelConfig, which: str, path) -> None:
    """Write one transformer backbone (embedding/prenet included, integrator
    excluded) plus the config subset needed to run it."""
    if which not in BACKBONE_COMPONENTS:
        raise ValueError(
            f"unknown component {which!r}; expected one of "
            f"{sorted(BACKBONE_COMPONENTS)}"
        )
    meta = {
        "kind": "backbone",
        "which": which,
        "model_config": config.to_dict(),
    }
    blobs = {n: params[n] for n in backbone_param_names(config, which)}
    write_container(path, meta, blobs)


def load_backbone(path) -> tuple[dict[str, np.ndarray], ModelConfig, str]:
    meta, blobs = read_container(path)
    if meta.get("kind") != "backbone":
        raise CheckpointError(f"{path}: not a backbone export")
    config = ModelConfig.from_dict(meta["model_config"])
    return blobs, config, meta["which"]
