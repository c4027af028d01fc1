"""Flat integer-array serialization shared by configurations and partitions.

Two formats, chosen by file suffix: ``.json`` holds a plain list in
row-major site order; anything else is raw little-endian 32-bit integers
with no header.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def write_int_array(path, arr) -> None:
    path = Path(path)
    arr = np.asarray(arr)
    if path.suffix == ".json":
        path.write_text(json.dumps([int(v) for v in arr]))
    else:
        path.write_bytes(arr.astype("<i4").tobytes())


def read_int_array(path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".json":
        return np.asarray(json.loads(path.read_text()), dtype=np.int64)
    return np.frombuffer(path.read_bytes(), dtype="<i4").astype(np.int64)
