"""Atomic file writers and the NPY/JSON conventions used by every artifact.

All rasters are NPY version 1.0, C-order, explicit little-endian dtype.
All sidecars are JSON with sorted keys and a trailing newline, so identical
inputs produce byte-identical files.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np
import numpy.lib.format

from .errors import IoError


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write bytes to a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise IoError(f"failed to write {path}: {exc}") from exc


def save_npy(path: str | Path, array: np.ndarray) -> None:
    """Save an array as NPY v1.0, C-order, little-endian."""
    arr = np.ascontiguousarray(array)
    if arr.dtype.byteorder == ">":
        arr = arr.astype(arr.dtype.newbyteorder("<"))
    import io

    buf = io.BytesIO()
    numpy.lib.format.write_array(buf, arr, version=(1, 0))
    atomic_write_bytes(path, buf.getvalue())


def load_npy(path: str | Path, dtype=None, ndim: int | None = None) -> np.ndarray:
    path = Path(path)
    try:
        arr = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise IoError(f"failed to read {path}: {exc}") from exc
    if dtype is not None and arr.dtype != np.dtype(dtype):
        raise IoError(f"{path}: expected dtype {np.dtype(dtype)}, found {arr.dtype}")
    if ndim is not None and arr.ndim != ndim:
        raise IoError(f"{path}: expected {ndim}-d array, found {arr.ndim}-d")
    return arr


def save_json(path: str | Path, obj) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    atomic_write_bytes(path, text.encode("utf-8"))


def load_json(path: str | Path):
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise IoError(f"failed to read {path}: {exc}") from exc
