"""Feature-sequence file format: a (T, D, fps) header plus the T x D matrix.

Two encodings share one loader: a little-endian binary layout behind a magic
prefix, and a whitespace text layout whose first line is the header.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .periodicity import FeatureSequence

MAGIC = b"RFSQ"
_HEADER = struct.Struct("<4sIId")  # magic, T, D, fps


def write_features(path: str | Path, seq: FeatureSequence, fmt: str = "binary") -> None:
    path = Path(path)
    t, d = seq.frames.shape
    if fmt == "binary":
        with path.open("wb") as fh:
            fh.write(_HEADER.pack(MAGIC, t, d, seq.fps))
            fh.write(np.ascontiguousarray(seq.frames, dtype="<f8").tobytes())
    elif fmt == "text":
        with path.open("w") as fh:
            fh.write(f"{t} {d} {seq.fps!r}\n")
            for row in seq.frames:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}; expected 'binary' or 'text'")


def read_features(path: str | Path) -> FeatureSequence:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] == MAGIC:
        if len(raw) < _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        _, t, d, fps = _HEADER.unpack_from(raw)
        expected = _HEADER.size + t * d * 8
        if len(raw) != expected:
            raise ValueError(f"{path}: expected {expected} bytes for {t}x{d}, got {len(raw)}")
        frames = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(t, d)
        return FeatureSequence(frames.copy(), fps)

    lines = raw.decode("utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty feature file")
    header = lines[0].split()
    if len(header) != 3:
        raise ValueError(f"{path}: header must be 'T D fps'")
    t, d, fps = int(header[0]), int(header[1]), float(header[2])
    rows = [line.split() for line in lines[1 : t + 1]]
    if len(rows) != t or any(len(r) != d for r in rows):
        raise ValueError(f"{path}: body does not match header {t}x{d}")
    frames = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
    return FeatureSequence(frames, fps)
