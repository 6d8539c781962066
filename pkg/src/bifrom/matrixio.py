"""Binary matrix files.

Layout: 8-byte ASCII magic ``LROMMAT1``, rows and cols as little-endian
uint64, then rows*cols little-endian float64 values in row-major order.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .errors import BadMagicError, BifromError, TruncatedFileError

MAGIC = b"LROMMAT1"
HEADER = 24


class IoFailure(BifromError, OSError):
    exit_code = 4


def save_matrix(path, matrix) -> None:
    a = np.asarray(matrix, dtype="<f8")
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {a.shape}")
    rows, cols = a.shape
    payload = MAGIC + np.array([rows, cols], dtype="<u8").tobytes() + np.ascontiguousarray(a).tobytes()
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_bytes(payload)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_matrix(path) -> np.ndarray:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if len(data) < HEADER:
        if not MAGIC.startswith(data[:8]):
            raise BadMagicError(f"{path}: not a matrix file")
        raise TruncatedFileError(f"{path}: header truncated ({len(data)} bytes)")
    if data[:8] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {data[:8]!r}")
    rows, cols = (int(v) for v in np.frombuffer(data, dtype="<u8", count=2, offset=8))
    expected = HEADER + 8 * rows * cols
    if len(data) < expected:
        raise TruncatedFileError(f"{path}: expected {expected} bytes, found {len(data)}")
    if len(data) > expected:
        raise TruncatedFileError(f"{path}: {len(data) - expected} trailing bytes")
    return np.frombuffer(data, dtype="<f8", count=rows * cols, offset=HEADER).reshape(rows, cols).astype(np.float64)
