"""SMEL: the on-disk spectrogram format.

Layout (little-endian throughout):
    magic   4 bytes  "SMEL"
    version u16      currently 1
    frames  u32
    mels    u32
    data    frames * mels float32, row-major (frame-major)
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import SmelFormatError
from .features import MelSpectrogram

MAGIC = b"SMEL"
VERSION = 1
_HEADER = struct.Struct("<4sHII")


def write_smel(mel: MelSpectrogram, path) -> None:
    data = np.asarray(mel.data)
    if data.ndim != 2 or data.shape[0] < 1:
        raise ValueError(f"mel data must be (frames >= 1, mels), got {data.shape}")
    if not np.all(np.isfinite(data)):
        raise ValueError("refusing to write non-finite mel data")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, data.shape[0], data.shape[1]))
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def read_smel(path) -> MelSpectrogram:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise SmelFormatError(f"{path}: truncated header")
        magic, version, n_frames, n_mels = _HEADER.unpack(header)
        if magic != MAGIC:
            raise SmelFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        if version != VERSION:
            raise SmelFormatError(
                f"{path}: unsupported version {version}, expected {VERSION}"
            )
        payload = fh.read()
    expected = 4 * n_frames * n_mels
    if len(payload) != expected:
        raise SmelFormatError(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    if n_frames < 1 or n_mels < 1:
        raise SmelFormatError(f"{path}: degenerate shape {n_frames}x{n_mels}")
    data = np.frombuffer(payload, dtype="<f4").reshape(n_frames, n_mels)
    return MelSpectrogram(data.copy(), standardized=False)
