"""The TNFC binary feature-file format.

Little-endian container: magic ``TNFC``, uint32 version, uint64 row
count, uint32 column count, then the row-major float32 matrix. This
mirrors the consumer side byte for byte; it is the interchange contract
between extraction and training.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .records import FeaturizerError

FEATURE_MAGIC = b"TNFC"
FEATURE_VERSION = 1
_HEADER = struct.Struct("<4sIQI")


def write_feature_file(path: str | Path, rows: np.ndarray) -> None:
    """Write a dense float32 matrix in the TNFC binary format."""
    rows = np.ascontiguousarray(rows, dtype="<f4")
    if rows.ndim != 2:
        raise ValueError(f"feature matrix must be 2-D, got shape {rows.shape}")
    header = _HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION, rows.shape[0], rows.shape[1])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(rows.tobytes())


def read_feature_file(path: str | Path) -> np.ndarray:
    """Read a TNFC file back, validating magic, version, and body size."""
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FeaturizerError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, n_rows, dim = _HEADER.unpack_from(raw)
    if magic != FEATURE_MAGIC:
        raise FeaturizerError(f"{path}: bad magic {magic!r}, expected {FEATURE_MAGIC!r}")
    if version != FEATURE_VERSION:
        raise FeaturizerError(f"{path}: unsupported format version {version}")
    body = raw[_HEADER.size :]
    expected = n_rows * dim * 4
    if len(body) != expected:
        raise FeaturizerError(
            f"{path}: header declares {n_rows} rows x dim {dim} ({expected} bytes) "
            f"but body has {len(body)} bytes"
        )
    return np.frombuffer(body, dtype="<f4").reshape(n_rows, dim).copy()
