from __future__ import annotations
import json
from pathlib import Path
from typing import Any

import numpy as np

from src.components.errors import DatasetFormatError
from src.components.numerics.utils import TENSOR_DTYPES


def write_tensor(path: Path, array: np.ndarray) -> Path:
    """Write ``array`` as a JSON header line followed by raw little-endian bytes."""
    array = np.asarray(array)
    name = "bool" if array.dtype == np.bool_ else array.dtype.name
    if name not in TENSOR_DTYPES:
        raise ValueError(f"unsupported tensor dtype '{array.dtype}' for {path}")
    header = json.dumps({"dtype": name, "shape": list(array.shape)}, sort_keys=True)
    body = np.ascontiguousarray(array, dtype=TENSOR_DTYPES[name]).tobytes()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(header.encode("utf-8") + b"\n")
        f.write(body)
    return path


def read_tensor(path: Path) -> np.ndarray:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise DatasetFormatError(path, "file not found") from None
    head, sep, body = raw.partition(b"\n")
    if not sep:
        raise DatasetFormatError(path, "missing tensor header line")
    try:
        header = json.loads(head.decode("utf-8"))
        name, shape = header["dtype"], tuple(int(s) for s in header["shape"])
    except (ValueError, KeyError, TypeError) as e:
        raise DatasetFormatError(path, f"corrupt tensor header ({e})") from None
    if name not in TENSOR_DTYPES:
        raise DatasetFormatError(path, f"unknown dtype '{name}'")
    dtype = np.dtype(TENSOR_DTYPES[name])
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(body) != expected:
        raise DatasetFormatError(
            path, f"expected {expected} bytes of tensor data for shape {list(shape)}, "
                  f"found {len(body)}")
    array = np.frombuffer(body, dtype=dtype).reshape(shape).copy()
    if name == "bool":
        return array.astype(bool)
    return array.astype(dtype.newbyteorder("="))


def write_json(path: Path, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    return path


def read_json(path: Path) -> Any:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise DatasetFormatError(path, "file not found") from None
    except json.JSONDecodeError as e:
        raise DatasetFormatError(path, f"invalid JSON ({e})") from None
