"""자체 raw tensor 포맷.

layout (little-endian):
    8 bytes  magic  b"DIMARAW1"
    u32      JSON header 길이
    bytes    UTF-8 JSON {"shape": [...], "dtype": "f32le", "meta": {...}}
    bytes    row-major float32 데이터
"""

import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

from modules.volume_io.exceptions import (
    BadMagicError,
    TruncatedDataError,
    UnsupportedDatatypeError,
    VolumeFormatError,
)
from utils.utils import canonical_json

RAW_MAGIC = b"DIMARAW1"
RAW_DTYPE = "f32le"
_PREFIX = struct.Struct("<8sI")


def save_raw(
    path: str | Path, array: Any, meta: dict[str, Any] | None = None
) -> Path:
    """float32 로 저장. 같은 입력이면 항상 같은 바이트."""
    path = Path(path)
    data = np.ascontiguousarray(np.asarray(array), dtype="<f4")
    header = canonical_json(
        {"shape": list(data.shape), "dtype": RAW_DTYPE, "meta": meta or {}}
    ).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(_PREFIX.pack(RAW_MAGIC, len(header)))
        f.write(header)
        f.write(data.tobytes())
    return path


def is_raw(path: str | Path) -> bool:
    with open(path, "rb") as f:
        return f.read(len(RAW_MAGIC)) == RAW_MAGIC


def load_raw(path: str | Path) -> tuple[np.ndarray, dict[str, Any]]:
    """(float32 배열, meta) 를 돌려준다."""
    blob = Path(path).read_bytes()
    if len(blob) < _PREFIX.size:
        raise TruncatedDataError(f"{path}: file shorter than raw prefix")
    magic, header_len = _PREFIX.unpack_from(blob)
    if magic != RAW_MAGIC:
        raise BadMagicError(f"{path}: bad raw magic {magic!r}")
    start = _PREFIX.size
    if len(blob) < start + header_len:
        raise TruncatedDataError(f"{path}: truncated raw header")
    try:
        header = json.loads(blob[start : start + header_len].decode("utf-8"))
        shape = tuple(int(d) for d in header["shape"])
    except (ValueError, KeyError, TypeError) as e:
        raise VolumeFormatError(f"{path}: invalid raw header ({e})") from e
    if header.get("dtype") != RAW_DTYPE:
        raise UnsupportedDatatypeError(
            f"{path}: unsupported raw dtype {header.get('dtype')!r}"
        )
    data_start = start + header_len
    expected = int(np.prod(shape, dtype=np.int64)) * 4
    if len(blob) - data_start < expected:
        raise TruncatedDataError(
            f"{path}: expected {expected} data bytes, "
            f"found {len(blob) - data_start}"
        )
    data = np.frombuffer(
        blob, dtype="<f4", count=expected // 4, offset=data_start
    )
    return data.reshape(shape).astype(np.float32), header.get("meta", {})
