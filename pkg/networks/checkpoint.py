"""ModelCheckpoint 바이너리 포맷.

layout (little-endian):
    8 bytes  magic b"DIMACKPT"
    u32      header 길이, UTF-8 JSON header
             {format_version, unet, schedule, provenance, param_names}
    반복     u32 이름 길이, 이름(UTF-8), u32 ndim, u32 * ndim dims,
             u64 byte 수, float32 데이터
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, BinaryIO

import numpy as np

from diffusion.schemas import ScheduleConfig
from networks.exceptions import CheckpointFormatError
from networks.schemas import TrainingProvenance, UNetConfig
from networks.unet import UNet, unet_param_shapes
from utils.utils import canonical_json

CHECKPOINT_MAGIC = b"DIMACKPT"
FORMAT_VERSION = 1


@dataclass
class ModelCheckpoint:
    config: UNetConfig
    params: dict[str, np.ndarray]
    schedule: ScheduleConfig | None = None
    provenance: TrainingProvenance = field(default_factory=TrainingProvenance)
    format_version: int = FORMAT_VERSION

    def __post_init__(self) -> None:
        validate_registry(self.config, self.params)
        if self.config.time_conditioned and self.schedule is None:
            raise CheckpointFormatError(
                "time-conditioned checkpoint needs a schedule"
            )

    @property
    def param_count(self) -> int:
        return sum(int(v.size) for v in self.params.values())

    def unet(self) -> UNet:
        return UNet(self.config, self.params)

    def header(self) -> dict[str, Any]:
        return {
            "format_version": self.format_version,
            "unet": self.config.to_json_dict(),
            "schedule": (
                self.schedule.to_json_dict() if self.schedule else None
            ),
            "provenance": self.provenance.to_json_dict(),
            "param_names": list(self.params),
        }


def validate_registry(cfg: UNetConfig, params: dict[str, np.ndarray]) -> None:
    """이름/shape 이 config 에서 계산한 registry 와 정확히 같아야 한다."""
    expected = unet_param_shapes(cfg)
    if set(expected) != set(params):
        missing = sorted(set(expected) - set(params))
        extra = sorted(set(params) - set(expected))
        raise CheckpointFormatError(
            f"parameter registry mismatch: missing={missing} extra={extra}"
        )
    for name, shape in expected.items():
        if tuple(params[name].shape) != shape:
            raise CheckpointFormatError(
                f"{name}: shape {params[name].shape} != expected {shape}"
            )


def _write_tensor(f: BinaryIO, name: str, value: np.ndarray) -> None:
    encoded = name.encode("utf-8")
    data = np.ascontiguousarray(value, dtype="<f4").tobytes()
    f.write(struct.pack("<I", len(encoded)))
    f.write(encoded)
    f.write(struct.pack("<I", value.ndim))
    f.write(struct.pack(f"<{value.ndim}I", *value.shape))
    f.write(struct.pack("<Q", len(data)))
    f.write(data)


def save_checkpoint(ckpt: ModelCheckpoint, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = canonical_json(ckpt.header()).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        for name, value in ckpt.params.items():
            _write_tensor(f, name, np.asarray(value))
    return path


class _Reader:
    def __init__(self, blob: bytes, path: Path) -> None:
        self.blob = blob
        self.path = path
        self.pos = 0

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.blob):
            raise CheckpointFormatError(f"{self.path}: truncated checkpoint")
        chunk = self.blob[self.pos : self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path: str | Path) -> ModelCheckpoint:
    path = Path(path)
    reader = _Reader(path.read_bytes(), path)
    if reader.take(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"{path}: bad checkpoint magic")
    (header_len,) = reader.unpack("<I")
    try:
        header = json.loads(reader.take(header_len).decode("utf-8"))
    except ValueError as e:
        raise CheckpointFormatError(f"{path}: invalid header ({e})") from e
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointFormatError(
            f"{path}: unsupported format version "
            f"{header.get('format_version')}"
        )

    params: dict[str, np.ndarray] = {}
    for _ in header["param_names"]:
        (name_len,) = reader.unpack("<I")
        name = reader.take(name_len).decode("utf-8")
        (ndim,) = reader.unpack("<I")
        shape = reader.unpack(f"<{ndim}I") if ndim else ()
        (nbytes,) = reader.unpack("<Q")
        if nbytes != 4 * int(np.prod(shape, dtype=np.int64)):
            raise CheckpointFormatError(f"{path}: {name} byte count mismatch")
        data = np.frombuffer(reader.take(nbytes), dtype="<f4")
        params[name] = data.reshape(shape).astype(np.float64)
    if reader.pos != len(reader.blob):
        raise CheckpointFormatError(f"{path}: trailing bytes after tensors")

    schedule = header.get("schedule")
    return ModelCheckpoint(
        config=UNetConfig.from_dict(header["unet"]),
        params=params,
        schedule=ScheduleConfig.from_dict(schedule) if schedule else None,
        provenance=TrainingProvenance.from_dict(header["provenance"]),
        format_version=header["format_version"],
    )
